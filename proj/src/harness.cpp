#include "alma/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "alma/errors.hpp"
#include "binary_io.hpp"

namespace alma {

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "alma") return AttackKind::Alma;
  if (name == "penalty") return AttackKind::Penalty;
  if (name == "bisect") return AttackKind::Bisect;
  throw InvalidArgument("unknown attack '" + std::string(name) + "' (expected alma, penalty or bisect)");
}

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::Alma: return "alma";
    case AttackKind::Penalty: return "penalty";
    case AttackKind::Bisect: return "bisect";
  }
  return "?";
}

std::optional<double> median_distance(const std::vector<SampleRecord>& records) {
  if (records.empty()) return std::nullopt;
  std::vector<double> d;
  d.reserve(records.size());
  for (const auto& r : records) d.push_back(r.success ? r.distance : std::numeric_limits<double>::infinity());
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double m = n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

std::vector<CurvePoint> robust_accuracy_curve(const std::vector<SampleRecord>& records,
                                              const std::vector<double>& thresholds) {
  std::vector<CurvePoint> curve;
  curve.reserve(thresholds.size());
  const double n = static_cast<double>(records.size());
  for (double t : thresholds) {
    std::size_t robust = 0;
    for (const auto& r : records) {
      if (!r.success || r.distance > t) ++robust;
    }
    curve.push_back({t, records.empty() ? 0.0 : static_cast<double>(robust) / n});
  }
  return curve;
}

std::vector<double> curve_thresholds(const std::vector<SampleRecord>& records) {
  std::vector<double> t{0.0};
  for (const auto& r : records) {
    if (r.success && std::isfinite(r.distance)) t.push_back(r.distance);
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

CampaignReport summarize(std::vector<SampleRecord> records) {
  CampaignReport rep;
  rep.attacked = records.size();
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    std::size_t correct = 0, success = 0, correct_success = 0;
    std::uint64_t fwd = 0, bwd = 0, init_fwd = 0, init_bwd = 0;  // exact totals, divided once
    std::vector<SampleRecord> correct_only;
    for (const auto& r : records) {
      if (!r.misclassified) {
        ++correct;
        correct_only.push_back(r);
        if (r.success) ++correct_success;
      }
      if (r.success) ++success;
      if (!r.error.empty()) ++rep.errors;
      fwd += r.forwards;
      bwd += r.backwards;
      init_fwd += r.init_forwards;
      init_bwd += r.init_backwards;
    }
    rep.mean_forwards = static_cast<double>(fwd) / n;
    rep.mean_backwards = static_cast<double>(bwd) / n;
    rep.mean_init_forwards = static_cast<double>(init_fwd) / n;
    rep.mean_init_backwards = static_cast<double>(init_bwd) / n;
    rep.clean_accuracy = static_cast<double>(correct) / n;
    rep.asr = 100.0 * static_cast<double>(success) / n;
    rep.median_distance = median_distance(records);
    if (correct > 0) rep.asr_correct_only = 100.0 * static_cast<double>(correct_success) / static_cast<double>(correct);
    rep.median_distance_correct_only = median_distance(correct_only);
  }
  rep.curve = robust_accuracy_curve(records, curve_thresholds(records));
  rep.records = std::move(records);
  return rep;
}

SampleRecord attack_sample(const Model& model, const Tensor& x, std::size_t label, std::size_t index,
                           const Campaign& campaign) {
  SampleRecord rec;
  rec.index = index;
  rec.label = label;
  rec.target = label;
  rec.distance = std::numeric_limits<double>::infinity();
  try {
    if (x.shape() != model.input_shape()) throw ShapeError("sample shape does not match the model input");
    const Tensor clean = trace_forward(model, x).output();
    rec.clean_prediction = predicted_label(clean);
    rec.misclassified = rec.clean_prediction != label;
    if (label >= model.num_classes()) throw InvalidArgument("label out of range for the model");
    rec.target = resolve_target(campaign.alma.constraint, clean, label);

    auto take = [&](const AttackResult& r) {
      rec.success = r.success;
      if (r.success) rec.distance = *r.distance;
      rec.forwards = r.counters.forwards;
      rec.backwards = r.counters.backwards;
      rec.init_forwards = r.init_counters.forwards;
      rec.init_backwards = r.init_counters.backwards;
      if (r.found_iteration) rec.found_iteration = static_cast<long>(*r.found_iteration);
    };
    switch (campaign.attack) {
      case AttackKind::Alma:
        take(alma_attack(model, x, rec.target, campaign.alma));
        break;
      case AttackKind::Penalty: {
        PenaltyAttackOptions opts = campaign.penalty;
        opts.distance = campaign.alma.distance;
        opts.constraint = campaign.alma.constraint;
        take(penalty_attack(model, x, rec.target, opts));
        break;
      }
      case AttackKind::Bisect: {
        if (campaign.alma.distance.kind != DistanceKind::L2) {
          throw InvalidArgument("the bisection wrapper drives an L2 budget attack; use --distance l2");
        }
        PgdOptions pgd = campaign.bisect.pgd;
        pgd.constraint = campaign.alma.constraint;
        PropagationCounter counter;
        const auto found = minimal_via_binary_search(
            [&](double budget) { return pgd_l2_budget_attack(model, x, rec.target, budget, pgd, counter); },
            campaign.bisect.lo, campaign.bisect.hi, campaign.bisect.precision);
        rec.forwards = counter.forwards;
        rec.backwards = counter.backwards;
        if (found) {
          rec.success = true;
          rec.distance = distance_value(campaign.alma.distance, found->adversarial, x);
        }
        break;
      }
    }
  } catch (const Error& e) {
    rec.success = false;
    rec.distance = std::numeric_limits<double>::infinity();
    rec.error = e.what();
  }
  return rec;
}

CampaignReport run_campaign(const Model& model, const Dataset& data, const Campaign& campaign) {
  data.validate();
  if (data.shape != model.input_shape()) {
    throw ShapeError("dataset shape " + shape_to_string(data.shape) + " does not match model input " +
                     shape_to_string(model.input_shape()));
  }
  const std::size_t limit = campaign.sample_limit == 0 ? data.size() : campaign.sample_limit;
  const std::vector<std::size_t> selected = select_samples(data.size(), limit, campaign.seed);

  std::vector<SampleRecord> records(selected.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= selected.size() || failed.load()) return;
      try {
        const std::size_t i = selected[k];
        records[k] = attack_sample(model, data.images[i], data.labels[i], i, campaign);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(campaign.workers, 1, std::max<std::size_t>(1, selected.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  CampaignReport report = summarize(std::move(records));
  if (!campaign.output_dir.empty()) write_report(report, campaign, campaign.output_dir);
  return report;
}

CampaignReport run_campaign(const Campaign& campaign) {
  const Model model = load_model(campaign.model_path);
  const Dataset data = load_dataset(campaign.dataset_path);
  return run_campaign(model, data, campaign);
}

// ---- report files ----------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader =
    "index,label,target,clean_prediction,misclassified,success,distance,forwards,backwards,init_forwards,"
    "init_backwards,found_iteration,error";

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

}  // namespace

std::string records_to_csv(const std::vector<SampleRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    out += std::to_string(r.index) + ',' + std::to_string(r.label) + ',' + std::to_string(r.target) + ',' +
           std::to_string(r.clean_prediction) + ',' + (r.misclassified ? "1" : "0") + ',' + (r.success ? "1" : "0") +
           ',' + format_double(r.distance) + ',' + std::to_string(r.forwards) + ',' + std::to_string(r.backwards) +
           ',' + std::to_string(r.init_forwards) + ',' + std::to_string(r.init_backwards) + ',' +
           std::to_string(r.found_iteration) + ',' + sanitize(r.error) + '\n';
  }
  return out;
}

std::vector<SampleRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("line 1: unexpected CSV header");
  std::vector<SampleRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    for (int k = 0; k < 12; ++k) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) throw ParseError("line " + std::to_string(line_no) + ": expected 13 fields");
      f.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    f.push_back(line.substr(pos));
    try {
      SampleRecord r;
      r.index = std::stoull(f[0]);
      r.label = std::stoull(f[1]);
      r.target = std::stoull(f[2]);
      r.clean_prediction = std::stoull(f[3]);
      r.misclassified = f[4] == "1";
      r.success = f[5] == "1";
      r.distance = std::stod(f[6]);
      r.forwards = std::stoull(f[7]);
      r.backwards = std::stoull(f[8]);
      r.init_forwards = std::stoull(f[9]);
      r.init_backwards = std::stoull(f[10]);
      r.found_iteration = std::stol(f[11]);
      r.error = f[12];
      records.push_back(std::move(r));
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) + ": malformed record");
    }
  }
  return records;
}

std::string report_to_json(const CampaignReport& report, const Campaign& campaign) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
  ordered_json cfg;
  cfg["attack"] = to_string(campaign.attack);
  cfg["distance"] = to_string(campaign.alma.distance.kind);
  cfg["constraint"] = describe(campaign.alma.constraint);
  cfg["seed"] = campaign.seed;
  cfg["sample_limit"] = campaign.sample_limit;
  if (campaign.attack == AttackKind::Alma) {
    cfg["iterations"] = campaign.alma.iterations;
    cfg["alpha"] = campaign.alma.alpha;
    cfg["epsilon"] = campaign.alma.epsilon;
    cfg["gamma"] = campaign.alma.gamma;
    cfg["tau"] = campaign.alma.tau;
    cfg["check_period"] = campaign.alma.check_period;
    cfg["penalty"] = to_string(campaign.alma.penalty.kind);
  } else if (campaign.attack == AttackKind::Penalty) {
    cfg["search_steps"] = campaign.penalty.search_steps;
    cfg["iterations"] = campaign.penalty.inner_iters;
    cfg["c_init"] = campaign.penalty.c_init;
    cfg["lr"] = campaign.penalty.lr;
  } else {
    cfg["lo"] = campaign.bisect.lo;
    cfg["hi"] = campaign.bisect.hi;
    cfg["precision"] = campaign.bisect.precision;
    cfg["pgd_steps"] = campaign.bisect.pgd.steps;
  }

  ordered_json j;
  j["config"] = cfg;
  j["attacked"] = report.attacked;
  j["clean_accuracy"] = report.clean_accuracy;
  j["asr"] = report.asr;
  j["median_distance"] = opt(report.median_distance);
  j["asr_correct_only"] = report.asr_correct_only;
  j["median_distance_correct_only"] = opt(report.median_distance_correct_only);
  j["mean_forwards"] = report.mean_forwards;
  j["mean_backwards"] = report.mean_backwards;
  j["mean_init_forwards"] = report.mean_init_forwards;
  j["mean_init_backwards"] = report.mean_init_backwards;
  j["errors"] = report.errors;
  return j.dump(2) + "\n";
}

std::string curve_to_dat(const std::vector<CurvePoint>& curve) {
  std::string out = "# threshold accuracy\n";
  for (const auto& p : curve) out += format_double(p.threshold) + ' ' + format_double(p.accuracy) + '\n';
  return out;
}

void write_report(const CampaignReport& report, const Campaign& campaign, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  io::write_file(dir / "samples.csv", records_to_csv(report.records));
  io::write_file(dir / "report.json", report_to_json(report, campaign));
  io::write_file(dir / "curve.dat", curve_to_dat(report.curve));
}

std::size_t workers_from_environment(std::size_t fallback) {
  const char* v = std::getenv("ALMA_WORKERS");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n <= 0) throw InvalidArgument(std::string("ALMA_WORKERS must be a positive integer, got '") + v + "'");
  return static_cast<std::size_t>(n);
}

}  // namespace alma
