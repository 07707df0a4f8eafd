// Acceptance runner: one pass/fail line per criterion.
//
//   insitu_acceptance [--only 1,2,...] [--work DIR] [--threads N]

#include "insitu/dataset.hpp"
#include "insitu/nn/model.hpp"
#include "insitu/nn/network.hpp"
#include "insitu/pipeline.hpp"
#include "insitu/verification.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <sys/wait.h>

using namespace insitu;
namespace fs = std::filesystem;

namespace {

struct Context {
  fs::path work;
  int threads = 1;
};

struct Outcome {
  bool passed = false;
  std::string detail;
};

Outcome from_check(const CheckResult& r) {
  std::ostringstream s;
  s << std::setprecision(3) << r.value << " (bound " << r.tolerance << ")";
  if (!r.detail.empty()) s << "; " << r.detail;
  return {r.passed, s.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Runs the command-line tool; returns its exit status.
int run_cli(const std::string& args, const fs::path& cache, const fs::path& log) {
  const std::string cmd = "INSITU_CACHE_DIR='" + cache.string() + "' '" + INSITU_CLI_PATH + "' " + args +
                          " >> '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome parameter_count(const Context&) {
  const Index n = nn::parameter_count(nn::NetworkConfig::standard());
  const nn::ResidualNetwork<double> net(nn::NetworkConfig::standard());
  return {n == 406300 && net.parameter_count() == n, std::to_string(n) + " trainable parameters"};
}

Outcome gradient(const Context&) { return from_check(verify_gradient()); }

Outcome rigid_limit(const Context& ctx) { return from_check(verify_rigid_limit(ctx.threads, 4.0)); }

Outcome round_trip(const Context&) { return from_check(verify_round_trip()); }

Outcome mesh_convergence(const Context& ctx) { return from_check(verify_mesh_convergence(ctx.threads)); }

Outcome edge_effect(const Context& ctx) { return from_check(verify_edge_effect(ctx.threads)); }

Outcome desk_learning(const Context& ctx) {
  const fs::path w = ctx.work / "learning";
  fs::remove_all(w / "desk");
  fs::remove_all(w / "model");
  fs::remove_all(w / "eval");
  fs::create_directories(w);
  const fs::path log = w / "log.txt";
  const fs::path config = fs::path(INSITU_DATA_DIR) / "desk_dataset.toml";
  const std::string threads = "--threads " + std::to_string(ctx.threads) + " ";
  const fs::path cache = ctx.work / "cache";
  if (run_cli(threads + "gen-dataset --config '" + config.string() + "' --out '" + (w / "desk").string() + "'",
              cache, log) != 0) {
    return {false, "gen-dataset failed, see " + log.string()};
  }
  const auto manifest = load_dataset(w / "desk");
  const Index records = manifest.train.size() + manifest.val.size() + manifest.test.size();
  if (run_cli(threads + "train --data '" + (w / "desk").string() + "' --config '" + config.string() +
                  "' --out '" + (w / "model").string() + "'",
              cache, log) != 0) {
    return {false, "training failed or diverged, see " + log.string()};
  }
  std::ifstream tj(w / "model" / "train.json");
  const auto summary = nlohmann::json::parse(tj);
  const int epochs = summary.at("epochs_run");
  const bool converged = summary.at("early_stopped").get<bool>() || epochs == 250;
  const int code = run_cli(threads + "evaluate --model '" + (w / "model" / "model.bin").string() + "' --data '" +
                               (w / "desk").string() + "' --out '" + (w / "eval").string() + "'",
                           cache, log);
  if (code != 0 && code != 3) return {false, "evaluate failed, see " + log.string()};
  std::ifstream rj(w / "eval" / "report.json");
  const auto report = nlohmann::json::parse(rj);
  const double nn_mean = report.at("network").at("mean");
  const double nn_median = report.at("network").at("median");
  const double tm_mean = report.at("two_microphone").at("mean");
  std::ostringstream s;
  s << std::setprecision(3) << records << " records, " << epochs << " epochs"
    << (summary.at("early_stopped").get<bool>() ? " (early stop)" : "") << ", mean MSE nn/2mic " << nn_mean
    << "/" << tm_mean << " = " << nn_mean / tm_mean << " (<= 0.1), median MSE nn " << nn_median << " (< 0.01)";
  return {records >= 2000 && converged && code == 0 && nn_mean <= 0.1 * tm_mean && nn_median < 1e-2, s.str()};
}

Outcome standardization(const Context& ctx) {
  const fs::path w = ctx.work / "standardization";
  fs::remove_all(w);
  const GreenCache cache(ctx.work / "cache");
  GenerationConfig g;
  g.train_base_cases = 2;
  g.test_base_cases = 1;
  g.draws_per_case = 20;
  g.elements_per_wavelength = 1.5;
  g.seed = 8;
  g.threads = ctx.threads;
  const auto grid = FrequencyGrid::standard();
  generate_dataset({}, g, grid, {}, cache, w / "data");
  const auto ds = load_dataset(w / "data");

  const auto z = ds.stats.apply(ds.train.features);
  const Eigen::RowVectorXd mean = z.colwise().mean();
  const Eigen::RowVectorXd sd = ((z.rowwise() - mean).array().square().colwise().mean()).sqrt();
  const double worst_mean = mean.cwiseAbs().maxCoeff();
  const double worst_sd = (sd.array() - 1.0).abs().maxCoeff();
  const bool train_stats = ds.stats == Standardization::fit(ds.train.features);

  bool uses_train_stats = true;
  for (const auto* split : {&ds.val, &ds.test}) {
    const auto applied = ds.stats.apply(split->features);
    const Index l = grid.size();
    Eigen::MatrixXd by_hand(split->size(), 2 * l + 1);
    by_hand.leftCols(l) = (split->features.leftCols(l).rowwise() - ds.stats.mean_re.transpose()).array().rowwise() /
                          ds.stats.std_re.transpose().array();
    by_hand.middleCols(l, l) =
        (split->features.middleCols(l, l).rowwise() - ds.stats.mean_im.transpose()).array().rowwise() /
        ds.stats.std_im.transpose().array();
    by_hand.col(2 * l) = (split->features.col(2 * l).array() - ds.stats.mean_theta) / ds.stats.std_theta;
    uses_train_stats = uses_train_stats && applied == by_hand;
  }

  nn::NetworkModel model{nn::ResidualNetwork<double>(nn::NetworkConfig::standard()),
                         Standardization::fit(ds.val.features)};
  nn::save_model(w / "mismatched.bin", model);
  bool mismatch_rejected = false;
  try {
    run_evaluate(w / "mismatched.bin", w / "data", w / "eval", {}, ctx.threads, 0);
  } catch (const std::exception&) {
    mismatch_rejected = true;
  }
  std::ostringstream s;
  s << std::setprecision(3) << "max |mean| " << worst_mean << ", max |std - 1| " << worst_sd
    << (uses_train_stats ? ", val/test use train statistics" : ", val/test statistics differ")
    << (mismatch_rejected ? ", mismatched model rejected" : ", mismatched model accepted");
  return {worst_mean < 1e-9 && worst_sd < 1e-9 && train_stats && uses_train_stats && mismatch_rejected, s.str()};
}

Outcome determinism(const Context& ctx) {
  const fs::path w = ctx.work / "determinism";
  fs::remove_all(w);
  fs::create_directories(w);
  const fs::path config = w / "small.toml";
  std::ofstream(config) << "seed = 314\n"
                           "[generation]\n"
                           "train_base_cases = 2\n"
                           "test_base_cases = 1\n"
                           "draws_per_case = 10\n"
                           "elements_per_wavelength = 2.0\n"
                           "[training]\n"
                           "max_epochs = 3\n"
                           "batch_size = 8\n";
  const fs::path log = w / "log.txt";
  for (const char* run : {"a", "b"}) {
    const fs::path dir = w / run;
    const std::string common = "--threads 1 --seed 314 ";
    if (run_cli(common + "gen-dataset --config '" + config.string() + "' --out '" + (dir / "data").string() + "'",
                dir / "cache", log) != 0 ||
        run_cli(common + "train --data '" + (dir / "data").string() + "' --config '" + config.string() +
                    "' --out '" + (dir / "model").string() + "'",
                dir / "cache", log) != 0) {
      return {false, std::string("run ") + run + " failed, see " + log.string()};
    }
  }
  int files = 0;
  std::vector<std::string> differing;
  for (const char* sub : {"data", "model"}) {
    for (const auto& e : fs::directory_iterator(w / "a" / sub)) {
      const fs::path other = w / "b" / sub / e.path().filename();
      ++files;
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        differing.push_back(std::string(sub) + "/" + e.path().filename().string());
      }
    }
  }
  std::ostringstream s;
  s << files << " files compared";
  for (const auto& d : differing) s << "; differs: " << d;
  return {differing.empty() && files >= 10, s.str()};
}

Outcome serialization(const Context& ctx) {
  const fs::path w = ctx.work / "serialization";
  fs::create_directories(w);
  const auto cfg = nn::NetworkConfig::standard();
  Rng rng(2718);
  Standardization stats;
  stats.mean_re = Eigen::VectorXd::NullaryExpr(190, [&] { return rng.uniform(-1.0, 1.0); });
  stats.std_re = Eigen::VectorXd::NullaryExpr(190, [&] { return rng.uniform(0.1, 2.0); });
  stats.mean_im = Eigen::VectorXd::NullaryExpr(190, [&] { return rng.uniform(-1.0, 1.0); });
  stats.std_im = Eigen::VectorXd::NullaryExpr(190, [&] { return rng.uniform(0.1, 2.0); });
  stats.mean_theta = 40.0;
  stats.std_theta = 23.0;
  nn::NetworkModel model{nn::ResidualNetwork<double>::glorot(cfg, 99), stats};
  nn::save_model(w / "model.bin", model);
  const auto back = nn::load_model(w / "model.bin", 190);
  Eigen::MatrixXd x =
      Eigen::MatrixXd::NullaryExpr(100, cfg.feature_length(), [&] { return rng.uniform(-3.0, 3.0); });
  for (Index r = 0; r < x.rows(); ++r) x(r, 380) = 80.0 * std::abs(x(r, 380)) / 3.0;
  const Eigen::MatrixXd a = model.predict_rows(x);
  const Eigen::MatrixXd b = back.predict_rows(x);
  const bool same = a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
  return {same, std::string("100 inputs, predictions ") + (same ? "bit-identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)(const Context&);
};

const Criterion kCriteria[] = {
    {1, "parameter count", parameter_count},
    {2, "gradient check", gradient},
    {3, "rigid-limit BEM", rigid_limit},
    {4, "two-microphone round trip", round_trip},
    {5, "mesh self-convergence", mesh_convergence},
    {6, "edge-effect phenomenology", edge_effect},
    {7, "desk-scale learning", desk_learning},
    {8, "standardization contract", standardization},
    {9, "determinism", determinism},
    {10, "model serialization", serialization},
};

std::set<int> parse_only(const std::string& list) {
  std::set<int> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.insert(std::stoi(item));
    } else {
      for (int i = std::stoi(item.substr(0, dash)); i <= std::stoi(item.substr(dash + 1)); ++i) out.insert(i);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Context ctx{fs::current_path() / "acceptance-work", 1};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = parse_only(argv[++i]);
    } else if (arg == "--work" && i + 1 < argc) {
      ctx.work = argv[++i];
    } else if (arg == "--threads" && i + 1 < argc) {
      ctx.threads = std::stoi(argv[++i]);
    } else {
      std::cerr << "usage: " << argv[0] << " [--only 1,2,5-7] [--work DIR] [--threads N]\n";
      return 1;
    }
  }
  fs::create_directories(ctx.work);

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += o.passed ? 0 : 1;
    std::cout << (o.passed ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  " << c.name << ": "
              << o.detail << "  [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat
              << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
