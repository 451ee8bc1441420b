#include "drmoe/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "drmoe/trainer.hpp"

namespace drmoe {

GenSpec reference_gen_spec(std::uint64_t seed) {
  GenSpec g;
  g.n = 4000;
  g.imbalance = 0.05;
  g.d_ctx = 16;
  g.d_seg = 16;
  g.mean_shift = 2.0;
  g.noise_corr = 0.5;
  g.seed = seed;
  return g;
}

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

namespace {

struct Job {
  std::size_t row = 0;
  std::size_t run = 0;
  RunConfig config;
};

}  // namespace

std::vector<AblationRow> run_ablation(const AblationSpec& spec) {
  spec.base.validate();
  const std::vector<double> rhos = spec.rhos.empty() ? std::vector<double>{spec.base.rho} : spec.rhos;

  std::vector<AblationRow> rows;
  std::vector<Job> jobs;
  for (ExpertMode e : spec.experts) {
    for (HeadMode h : spec.heads) {
      for (double rho : rhos) {
        AblationRow row;
        row.expert = e;
        row.head = h;
        row.rho = rho;
        row.runs.resize(spec.seeds.size());
        for (std::size_t k = 0; k < spec.seeds.size(); ++k) {
          RunConfig c = spec.base;
          c.expert_mode = to_string(e);
          c.head_mode = to_string(h);
          c.rho = rho;
          c.seed = spec.seeds[k];
          c.d_ctx = spec.data.d_ctx;
          c.d_seg = spec.data.d_seg;
          c.validate();
          jobs.push_back({rows.size(), k, c});
        }
        rows.push_back(std::move(row));
      }
    }
  }

  // Datasets depend only on the seed; build each once.
  std::vector<std::array<Dataset, 3>> splits;
  for (std::uint64_t seed : spec.seeds) {
    GenSpec g = spec.data;
    g.seed = seed;
    splits.push_back(split_dataset(generate(g), spec.fracs));
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        const Job& job = jobs[i];
        const auto& data = splits[job.run];
        const TrainState st =
            train(job.config.model_config(), job.config.train_config(), job.config.seed, data[0]);
        rows[job.row].runs[job.run] = {job.config.seed, evaluate(st.model, data[2], job.config.threshold)};
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned n_workers = std::max(1u, spec.jobs);
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (auto& row : rows) {
    std::vector<double> f, r, a;
    for (const auto& run : row.runs) {
      f.push_back(run.test.f_macro);
      r.push_back(run.test.recall_mistake);
      a.push_back(run.test.auc.value_or(0.5));
    }
    row.f_macro = mean_std(f);
    row.recall_mistake = mean_std(r);
    row.auc = mean_std(a);
  }
  return rows;
}

const AblationRow* find_row(const std::vector<AblationRow>& rows, ExpertMode e, HeadMode h) {
  for (const auto& row : rows) {
    if (row.expert == e && row.head == h) return &row;
  }
  return nullptr;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-6s %6s  %-17s  %-17s  %-17s\n", "experts", "heads", "rho", "macro-F",
                "mistake-recall", "AUC");
  out += buf;
  out += std::string(80, '-') + "\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %-6s %6.3f  %.4f +/- %.4f  %.4f +/- %.4f  %.4f +/- %.4f\n",
                  to_string(r.expert).c_str(), to_string(r.head).c_str(), r.rho, r.f_macro.mean, r.f_macro.stddev,
                  r.recall_mistake.mean, r.recall_mistake.stddev, r.auc.mean, r.auc.stddev);
    out += buf;
  }
  return out;
}

nlohmann::ordered_json to_json(const std::vector<AblationRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["experts"] = to_string(r.expert);
    j["heads"] = to_string(r.head);
    j["rho"] = r.rho;
    j["f_macro"] = {{"mean", r.f_macro.mean}, {"std", r.f_macro.stddev}};
    j["recall_mistake"] = {{"mean", r.recall_mistake.mean}, {"std", r.recall_mistake.stddev}};
    j["auc"] = {{"mean", r.auc.mean}, {"std", r.auc.stddev}};
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& run : r.runs) {
      nlohmann::ordered_json rj;
      rj["seed"] = run.seed;
      const nlohmann::json report = to_json(run.test);
      for (const auto& [k, v] : report.items()) rj[k] = v;
      runs.push_back(rj);
    }
    j["runs"] = runs;
    arr.push_back(j);
  }
  return arr;
}

}  // namespace drmoe
