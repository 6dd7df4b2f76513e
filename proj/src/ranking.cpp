#include "strokeshift/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "strokeshift/errors.hpp"

namespace strokeshift {

double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

RankScore rank_score(const CandidateScores& scores) {
  const std::size_t phases = scores.phase.size();
  if (phases < 2) throw ContractViolation("rank_score: need at least two phases");
  if (scores.delta.size() + 1 != phases) {
    throw ContractViolation("rank_score: need exactly K-1 delta entries");
  }

  RankScore out;
  double numerator = 1.0;
  for (const auto& p : scores.phase) {
    numerator *= p.clip;
    const double phi = standard_normal_cdf(p.ir);
    out.s_ir += phi * phi;
    out.s_hps += p.hps * p.hps;
  }
  const double exponent = static_cast<double>(phases) / static_cast<double>(phases - 1);
  double denominator = 1.0;
  for (const auto& d : scores.delta) {
    if (d.clip == 0.0) {
      throw UndefinedRatioError("rank_score: delta CLIP score is zero");
    }
    denominator *= phases == 2 ? d.clip * d.clip : std::pow(std::abs(d.clip), exponent);
    const double phi = standard_normal_cdf(d.ir);
    out.s_ir -= phi * phi;
    out.s_hps -= d.hps * d.hps;
  }
  out.s_clip = numerator / denominator;
  out.r = out.s_clip * out.s_ir * out.s_hps;
  return out;
}

double structural_concealment(double metric_full, double metric_delta) {
  return metric_full - metric_delta;
}

double semantic_concealment(const Eigen::MatrixXd& similarity, double temperature) {
  if (similarity.rows() != similarity.cols() || similarity.rows() == 0) {
    throw ContractViolation("semantic_concealment: similarity matrix must be square");
  }
  if (!(temperature > 0.0)) {
    throw ContractViolation("semantic_concealment: temperature must be > 0");
  }
  double trace = 0.0;
  for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
    const Eigen::RowVectorXd logits = similarity.row(i) / temperature;
    const double shift = logits.maxCoeff();
    const Eigen::RowVectorXd weights = (logits.array() - shift).exp();
    trace += weights[i] / weights.sum();
  }
  return trace;
}

namespace {

bool meets(const MetricTriple& m, const MetricThresholds& t) {
  return m.clip >= t.clip && m.ir >= t.ir && m.hps >= t.hps;
}

bool passes(const CandidateScores& c, const MetricThresholds& t) {
  return std::all_of(c.phase.begin(), c.phase.end(),
                     [&](const MetricTriple& m) { return meets(m, t); });
}

}  // namespace

std::vector<CandidateScores> filter_candidates(std::span<const CandidateScores> candidates,
                                               const MetricThresholds& thresholds) {
  std::vector<CandidateScores> kept;
  for (const auto& c : candidates) {
    if (passes(c, thresholds)) kept.push_back(c);
  }
  return kept;
}

RankingReport rank_candidates(std::span<const CandidateScores> candidates,
                              const MetricThresholds& thresholds) {
  RankingReport report;
  for (const auto& c : candidates) {
    if (!passes(c, thresholds)) {
      report.excluded.push_back({c.id, "below-threshold"});
      continue;
    }
    try {
      report.ranked.push_back({c.id, rank_score(c)});
    } catch (const UndefinedRatioError&) {
      report.excluded.push_back({c.id, "undefined-ratio"});
    }
  }
  std::sort(report.ranked.begin(), report.ranked.end(),
            [](const RankedCandidate& a, const RankedCandidate& b) {
              if (a.score.r != b.score.r) return a.score.r > b.score.r;
              if (a.score.s_clip != b.score.s_clip) return a.score.s_clip > b.score.s_clip;
              return a.id < b.id;
            });
  return report;
}

}  // namespace strokeshift
