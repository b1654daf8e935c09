#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "alma/baselines.hpp"
#include "alma/dataset.hpp"
#include "alma/errors.hpp"
#include "alma/harness.hpp"
#include "alma/training.hpp"

namespace {

using namespace alma;

// Settings shared by the three campaign subcommands.
struct CampaignFlags {
  std::string model = "data/reference_model.bin";
  std::string data = "data/desk_test.bin";
  std::string distance = "l2";
  std::string accumulation = "sum";
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  std::string out;
  bool targeted = false;
  std::string target_rule = "second";
};

void add_campaign_flags(CLI::App* cmd, CampaignFlags& f) {
  cmd->add_option("--model", f.model, "model file")->capture_default_str();
  cmd->add_option("--data", f.data, "dataset file")->capture_default_str();
  cmd->add_option("--distance", f.distance, "l1, l2, ciede2000 or ssim")->capture_default_str();
  cmd->add_option("--accumulation", f.accumulation, "CIEDE2000 pixel reduction: sum, mean or l2")->capture_default_str();
  cmd->add_option("--samples", f.samples, "number of samples to attack (0 = all)")->capture_default_str();
  cmd->add_option("--seed", f.seed, "seed for sample selection")->capture_default_str();
  cmd->add_option("--out", f.out, "directory for samples.csv, report.json and curve.dat");
  cmd->add_flag("--targeted", f.targeted, "targeted attack (tDLR+ constraint)");
  cmd->add_option("--target-rule", f.target_rule, "fixed:<k> or second")->capture_default_str();
}

Campaign campaign_from(const CampaignFlags& f, AttackKind kind, std::size_t iterations) {
  Campaign c;
  c.model_path = f.model;
  c.dataset_path = f.data;
  c.attack = kind;
  const DistanceSpec distance = parse_distance(f.distance);
  c.alma = AlmaConfig::defaults(distance.kind, iterations);
  c.alma.distance = distance;
  c.alma.distance.accumulation = parse_accumulation(f.accumulation);
  if (f.targeted) c.alma.constraint = parse_target_rule(f.target_rule);
  c.sample_limit = f.samples;
  c.seed = f.seed;
  c.output_dir = f.out;
  c.workers = workers_from_environment(1);
  return c;
}

void print_summary(const CampaignReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "attacked %zu  clean accuracy %.2f%%  errors %zu\n", r.attacked, 100.0 * r.clean_accuracy,
                r.errors);
  std::cout << buf;
  auto med = [](const std::optional<double>& m) {
    char b[64];
    if (m) {
      std::snprintf(b, sizeof b, "%.6g", *m);
      return std::string(b);
    }
    return std::string("undefined");
  };
  std::snprintf(buf, sizeof buf, "ASR %.2f%%  median distance %s\n", r.asr, med(r.median_distance).c_str());
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "correctly classified only: ASR %.2f%%  median distance %s\n", r.asr_correct_only,
                med(r.median_distance_correct_only).c_str());
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "propagations per sample: %.1f forwards, %.1f backwards (+%.1f / %.1f init)\n",
                r.mean_forwards, r.mean_backwards, r.mean_init_forwards, r.mean_init_backwards);
  std::cout << buf;
}

// key=value lines become --key=value arguments placed before the explicit ones,
// skipping keys that already appear on the command line.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[++i];
    } else if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!path) return rest;

  std::ifstream in(*path);
  if (!in) throw IoError("cannot open config '" + *path + "'");
  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.starts_with("--")) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  }
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(*path + ":" + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!given.count(key)) injected.push_back("--" + key + "=" + value);
  }
  // Subcommand name stays first so the injected flags bind to it.
  std::vector<std::string> out;
  if (!rest.empty() && !rest.front().starts_with("-")) {
    out.push_back(rest.front());
    out.insert(out.end(), injected.begin(), injected.end());
    out.insert(out.end(), rest.begin() + 1, rest.end());
  } else {
    out = injected;
    out.insert(out.end(), rest.begin(), rest.end());
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Minimal-perturbation attacks on small classifiers via an augmented Lagrangian solver", "alma"};
  app.require_subcommand(1);
  app.add_option("--config", "key=value file mirroring the long flags; explicit flags win");

  // attack
  CampaignFlags attack_flags;
  std::size_t iterations = 1000;
  std::optional<double> alpha, epsilon;
  double gamma = 1.2, tau = 0.95;
  std::size_t check_period = 10;
  std::string penalty = "p2";
  auto* attack = app.add_subcommand("attack", "run ALMA over a dataset");
  add_campaign_flags(attack, attack_flags);
  attack->add_option("--iterations", iterations, "iterations per sample")->capture_default_str();
  attack->add_option("--alpha", alpha, "multiplier EMA coefficient (default 0.5 below 1000 iterations, else 0.9)");
  attack->add_option("--epsilon", epsilon, "initial step distance (default depends on the distance)");
  attack->add_option("--gamma", gamma, "penalty parameter growth")->capture_default_str();
  attack->add_option("--tau", tau, "required constraint improvement")->capture_default_str();
  attack->add_option("--check-period", check_period, "iterations between penalty parameter checks")->capture_default_str();
  attack->add_option("--penalty", penalty, "phr, p1, p2 or p3")->capture_default_str();

  // penalty-attack
  CampaignFlags penalty_flags;
  PenaltyAttackOptions penalty_opts;
  auto* penalty_cmd = app.add_subcommand("penalty-attack", "run the C&W-style penalty baseline over a dataset");
  add_campaign_flags(penalty_cmd, penalty_flags);
  penalty_cmd->add_option("--search-steps", penalty_opts.search_steps, "penalty weight search rounds")->capture_default_str();
  penalty_cmd->add_option("--iterations", penalty_opts.inner_iters, "iterations per round")->capture_default_str();
  penalty_cmd->add_option("--c-init", penalty_opts.c_init, "initial penalty weight")->capture_default_str();
  penalty_cmd->add_option("--lr", penalty_opts.lr, "step size")->capture_default_str();

  // bisect-budget
  CampaignFlags bisect_flags;
  BisectOptions bisect_opts;
  auto* bisect_cmd = app.add_subcommand("bisect-budget", "bisection on the budget of an L2 PGD attack");
  add_campaign_flags(bisect_cmd, bisect_flags);
  bisect_cmd->add_option("--lo", bisect_opts.lo, "lower budget")->capture_default_str();
  bisect_cmd->add_option("--hi", bisect_opts.hi, "upper budget, must succeed")->capture_default_str();
  bisect_cmd->add_option("--precision", bisect_opts.precision, "final bracket width")->capture_default_str();
  bisect_cmd->add_option("--pgd-steps", bisect_opts.pgd.steps, "PGD steps per budget")->capture_default_str();

  // train-ref
  std::string train_data = "data/desk_train.bin";
  std::string train_out = "data/reference_model.bin";
  TrainingOptions train_opts;
  auto* train = app.add_subcommand("train-ref", "train the small reference classifier");
  train->add_option("--data", train_data, "training dataset")->capture_default_str();
  train->add_option("--out", train_out, "model file to write")->capture_default_str();
  train->add_option("--epochs", train_opts.epochs, "epochs")->capture_default_str();
  train->add_option("--seed", train_opts.seed, "initialisation and shuffling seed")->capture_default_str();
  train->add_option("--hidden", train_opts.hidden, "hidden width")->capture_default_str();
  train->add_option("--lr", train_opts.learning_rate, "SGD step")->capture_default_str();
  train->add_option("--batch", train_opts.batch_size, "minibatch size")->capture_default_str();

  // make-data
  std::size_t data_count = 1000;
  std::uint64_t data_seed = 1;
  std::string data_out;
  std::string import_dir;
  auto* make_data = app.add_subcommand("make-data", "write the procedural desk dataset or import PGM/PPM folders");
  make_data->add_option("--count", data_count, "samples to generate")->capture_default_str();
  make_data->add_option("--seed", data_seed, "generator seed")->capture_default_str();
  make_data->add_option("--import", import_dir, "directory of <label>/*.pgm|*.ppm to import instead");
  make_data->add_option("--out", data_out, "dataset file to write")->required();

  // alm-demo
  std::string demo_penalty = "all";
  AlmOptions demo_opts;
  auto* demo = app.add_subcommand("alm-demo", "generic augmented Lagrangian on analytic problems");
  demo->add_option("--penalty", demo_penalty, "phr, p1, p2, p3 or all")->capture_default_str();
  demo->add_option("--outer", demo_opts.outer_iters, "outer iterations")->capture_default_str();
  demo->add_option("--rho-factor", demo_opts.rho_factor, "penalty parameter growth, in [2, 100]")->capture_default_str();

  // report
  std::string report_csv;
  std::string report_out;
  bool want_curve = false;
  auto* report = app.add_subcommand("report", "recompute aggregates from a samples.csv");
  report->add_option("csv", report_csv, "per-sample CSV written by a campaign")->required();
  report->add_flag("--curve", want_curve, "print the robust accuracy curve");
  report->add_option("--out", report_out, "write the curve as gnuplot data instead of printing it");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = expand_config(args);
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (attack->parsed() || penalty_cmd->parsed() || bisect_cmd->parsed()) {
    Campaign c;
    if (attack->parsed()) {
      c = campaign_from(attack_flags, AttackKind::Alma, iterations);
      if (alpha) c.alma.alpha = *alpha;
      if (epsilon) c.alma.epsilon = *epsilon;
      c.alma.gamma = gamma;
      c.alma.tau = tau;
      c.alma.check_period = check_period;
      c.alma.penalty = parse_penalty(penalty);
      c.alma.validate();
    } else if (penalty_cmd->parsed()) {
      c = campaign_from(penalty_flags, AttackKind::Penalty, penalty_opts.inner_iters);
      c.penalty = penalty_opts;
    } else {
      c = campaign_from(bisect_flags, AttackKind::Bisect, 1);
      c.bisect = bisect_opts;
    }
    print_summary(run_campaign(c));
    return 0;
  }

  if (train->parsed()) {
    const Dataset data = load_dataset(train_data);
    const TrainingReport rep = train_reference_model(data, train_opts);
    save_model(rep.model, train_out);
    std::printf("parameters %zu  final loss %.6f  train accuracy %.2f%%\n", rep.model.parameter_count(),
                rep.epoch_loss.back(), 100.0 * rep.train_accuracy);
    return 0;
  }

  if (make_data->parsed()) {
    const Dataset data = import_dir.empty() ? make_desk_dataset(data_count, data_seed) : import_image_directory(import_dir);
    save_dataset(data, data_out);
    std::printf("wrote %zu samples of shape %s\n", data.size(), shape_to_string(data.shape).c_str());
    return 0;
  }

  if (demo->parsed()) {
    std::vector<PenaltyKind> kinds;
    if (demo_penalty == "all") {
      kinds = {PenaltyKind::Phr, PenaltyKind::P1, PenaltyKind::P2, PenaltyKind::P3};
    } else {
      kinds = {parse_penalty(demo_penalty).kind};
    }
    for (const auto& problem : {halfspace_projection_problem(), active_bound_problem(), inactive_bound_problem()}) {
      for (auto kind : kinds) {
        std::printf("%s / %s\n", problem.name.c_str(), to_string(kind).c_str());
        std::printf("%6s %14s %14s %12s %12s %8s\n", "outer", "objective", "constraint", "mu", "rho", "inner");
        const AlmResult res = generic_alm(problem, PenaltySpec{kind}, demo_opts);
        for (std::size_t i = 0; i < res.trace.size(); ++i) {
          const auto& t = res.trace[i];
          std::printf("%6zu %14.8g %14.6e %12.6g %12.4g %8zu\n", i, t.objective, t.constraint, t.mu, t.rho,
                      t.inner_steps);
        }
        double err = 0.0;
        if (problem.solution) {
          for (std::size_t k = 0; k < res.x.size(); ++k) err = std::max(err, std::abs(res.x[k] - (*problem.solution)[k]));
        }
        std::printf("solution error %.3e  final mu %.6g\n\n", err, res.mu);
      }
    }
    return 0;
  }

  if (report->parsed()) {
    std::ifstream in(report_csv, std::ios::binary);
    if (!in) throw IoError("cannot open '" + report_csv + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    const CampaignReport rep = summarize(records_from_csv(ss.str()));
    print_summary(rep);
    if (want_curve) {
      const std::string dat = curve_to_dat(rep.curve);
      if (report_out.empty()) {
        std::cout << dat;
      } else {
        std::ofstream(report_out, std::ios::binary) << dat;
      }
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const alma::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
