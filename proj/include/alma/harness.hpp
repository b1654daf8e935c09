#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "alma/baselines.hpp"
#include "alma/dataset.hpp"
#include "alma/model.hpp"
#include "alma/solver.hpp"

namespace alma {

enum class AttackKind { Alma, Penalty, Bisect };

AttackKind parse_attack_kind(std::string_view name);  // "alma" | "penalty" | "bisect"
std::string to_string(AttackKind kind);

/// L2 budget attack wrapped in a bisection on the budget.
struct BisectOptions {
  double lo = 0.0;
  double hi = 10.0;
  double precision = 0.01;
  PgdOptions pgd{};
};

struct Campaign {
  std::filesystem::path model_path;
  std::filesystem::path dataset_path;
  AttackKind attack = AttackKind::Alma;
  AlmaConfig alma = AlmaConfig::defaults(DistanceKind::L2, 1000);  // distance and constraint apply to every attack
  PenaltyAttackOptions penalty{};
  BisectOptions bisect{};
  std::size_t sample_limit = 0;  // 0 means every sample
  std::size_t workers = 1;
  std::filesystem::path output_dir;  // empty: no files written
  std::uint64_t seed = 0;            // sample selection only
};

struct SampleRecord {
  std::size_t index = 0;  // position in the dataset
  std::size_t label = 0;
  std::size_t target = 0;  // label handed to the constraint
  std::size_t clean_prediction = 0;
  bool misclassified = false;  // clean prediction already differs from the label
  bool success = false;
  double distance = 0.0;  // +inf on failure
  std::uint64_t forwards = 0;
  std::uint64_t backwards = 0;
  std::uint64_t init_forwards = 0;
  std::uint64_t init_backwards = 0;
  long found_iteration = -1;
  std::string error;  // non-empty when the attack raised

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct CurvePoint {
  double threshold = 0.0;
  double accuracy = 0.0;
};

struct CampaignReport {
  std::size_t attacked = 0;
  double clean_accuracy = 0.0;  // on attacked samples
  double asr = 0.0;             // percent
  std::optional<double> median_distance;  // undefined unless ASR > 50%
  // Same statistics restricted to samples the model classified correctly.
  double asr_correct_only = 0.0;
  std::optional<double> median_distance_correct_only;
  double mean_forwards = 0.0;
  double mean_backwards = 0.0;
  double mean_init_forwards = 0.0;
  double mean_init_backwards = 0.0;
  std::size_t errors = 0;
  std::vector<SampleRecord> records;
  std::vector<CurvePoint> curve;
};

/// Median over all records with failures at +inf; nullopt when it is infinite
/// (ASR <= 50%) or records are empty. Even counts average the two middle values.
std::optional<double> median_distance(const std::vector<SampleRecord>& records);

/// accuracy(t) = fraction of records whose attack failed or whose distance exceeds t.
std::vector<CurvePoint> robust_accuracy_curve(const std::vector<SampleRecord>& records,
                                              const std::vector<double>& thresholds);

/// Thresholds at 0 and at every distinct finite distance, ascending.
std::vector<double> curve_thresholds(const std::vector<SampleRecord>& records);

/// Aggregates records into a report (curve included).
CampaignReport summarize(std::vector<SampleRecord> records);

/// Attacks one sample with the campaign's attack.
SampleRecord attack_sample(const Model& model, const Tensor& x, std::size_t label, std::size_t index,
                           const Campaign& campaign);

/// Loads model and dataset from the campaign paths, attacks, writes reports when output_dir is set.
CampaignReport run_campaign(const Campaign& campaign);
/// Same on in-memory inputs.
CampaignReport run_campaign(const Model& model, const Dataset& data, const Campaign& campaign);

std::string records_to_csv(const std::vector<SampleRecord>& records);
std::vector<SampleRecord> records_from_csv(const std::string& text);
std::string report_to_json(const CampaignReport& report, const Campaign& campaign);
std::string curve_to_dat(const std::vector<CurvePoint>& curve);

/// Writes samples.csv, report.json and curve.dat into dir (created if missing).
void write_report(const CampaignReport& report, const Campaign& campaign, const std::filesystem::path& dir);

/// Worker count from ALMA_WORKERS, or `fallback` when unset.
std::size_t workers_from_environment(std::size_t fallback = 1);

}  // namespace alma
