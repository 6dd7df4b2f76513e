#pragma once

#include <Eigen/Core>

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace strokeshift {

/// CLIP (x100 units), ImageReward and HPS for one render against its prompt.
struct MetricTriple {
  double clip = 0.0;
  double ir = 0.0;
  double hps = 0.0;
};

/// `phase[i]` scores the cumulative render of phase i+1 against prompt i+1;
/// `delta[j]` scores the subset S_{j+2} rendered alone against prompt j+2.
/// A K-phase candidate has K phase entries and K-1 delta entries.
struct CandidateScores {
  std::string id;
  std::vector<MetricTriple> phase;
  std::vector<MetricTriple> delta;
};

/// rank_score cannot be evaluated because a delta CLIP score is zero.
class UndefinedRatioError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct RankScore {
  double s_clip = 0.0;
  double s_ir = 0.0;
  double s_hps = 0.0;
  double r = 0.0;
};

/// Phi(x) = P(Z <= x) for a standard normal Z.
double standard_normal_cdf(double x);

/// Two phases:
///   S_CLIP = CLIP_1 CLIP_2 / CLIP_delta^2
///   S_IR   = Phi(IR_1)^2 + Phi(IR_2)^2 - Phi(IR_delta)^2
///   S_HPS  = HPS_1^2 + HPS_2^2 - HPS_delta^2
///   R      = S_CLIP S_IR S_HPS
/// K > 2 (extension): the numerator product runs over all K phases and each delta
/// CLIP enters the denominator with exponent K/(K-1), keeping S_CLIP scale-free;
/// the IR/HPS sums run over all phases minus all deltas.
RankScore rank_score(const CandidateScores& scores);

/// M_full - M_delta.
double structural_concealment(double metric_full, double metric_delta);

/// Default softmax temperature for semantic concealment.
inline constexpr double kDefaultSemanticTemperature = 0.07;

/// tr(softmax(S / tau)) with the softmax over each row. Rows are phase images,
/// columns are prompts.
double semantic_concealment(const Eigen::MatrixXd& similarity,
                            double temperature = kDefaultSemanticTemperature);

struct MetricThresholds {
  double clip = -std::numeric_limits<double>::infinity();
  double ir = -std::numeric_limits<double>::infinity();
  double hps = -std::numeric_limits<double>::infinity();
};

/// Candidates whose every phase entry meets every threshold, in input order.
std::vector<CandidateScores> filter_candidates(std::span<const CandidateScores> candidates,
                                               const MetricThresholds& thresholds);

struct RankedCandidate {
  std::string id;
  RankScore score;
};

struct ExcludedCandidate {
  std::string id;
  std::string reason;
};

struct RankingReport {
  std::vector<RankedCandidate> ranked;
  std::vector<ExcludedCandidate> excluded;
};

/// Filters, scores and sorts by R descending; ties go to the larger S_CLIP, then
/// the smaller id. Failing candidates are listed with reason "below-threshold"
/// or "undefined-ratio".
RankingReport rank_candidates(std::span<const CandidateScores> candidates,
                              const MetricThresholds& thresholds = {});

}  // namespace strokeshift
