#include "meshcal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meshcal/dataio.hpp"

namespace meshcal::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ClassStats class_stats(std::vector<double> abs_residuals, std::size_t total) {
  ClassStats s;
  s.count = abs_residuals.size();
  s.share = total ? static_cast<double>(s.count) / total : 0.0;
  if (abs_residuals.empty()) return s;
  double sum = 0.0;
  for (double v : abs_residuals) sum += v;
  s.mean = sum / s.count;
  double var = 0.0;
  for (double v : abs_residuals) var += (v - s.mean) * (v - s.mean);
  s.variance = var / s.count;
  std::sort(abs_residuals.begin(), abs_residuals.end());
  auto q = [&](double p) {
    const double h = (abs_residuals.size() - 1) * p / 100.0;
    const std::size_t i = static_cast<std::size_t>(h);
    if (i + 1 >= abs_residuals.size()) return abs_residuals.back();
    return abs_residuals[i] + (h - i) * (abs_residuals[i + 1] - abs_residuals[i]);
  };
  s.median = q(50.0);
  s.sigma1 = q(68.27);
  s.sigma2 = q(95.45);
  s.sigma3 = q(99.73);
  s.p25 = q(25.0);
  s.p50 = q(50.0);
  s.p75 = q(75.0);
  return s;
}

void check_truth(const std::vector<DistanceMatrix>& dataset,
                 const NetworkTruth& truth) {
  if (truth.positions.empty()) throw NoTruth("no ground truth positions");
  if (!dataset.empty() && dataset.front().size() != truth.size())
    throw NoTruth("ground truth does not cover the dataset nodes");
}

}  // namespace

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InsufficientData("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (values.size() - 1) * p / 100.0;
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= values.size()) return values.back();
  return values[i] + (h - i) * (values[i + 1] - values[i]);
}

RangingStats ranging_stats(const std::vector<DistanceMatrix>& dataset,
                           const NetworkTruth& truth) {
  check_truth(dataset, truth);
  RangingStats out;
  std::vector<double> abs_los, abs_nlos, abs_all;
  for (const auto& m : dataset) {
    const int n = m.size();
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (!m.has(i, j)) continue;
        const double r = m.at(i, j) - true_distance(truth, i, j);
        const double a = std::abs(r);
        abs_all.push_back(a);
        if (truth.visibility.los(i, j)) {
          abs_los.push_back(a);
          out.signed_los.push_back(r);
        } else {
          abs_nlos.push_back(a);
          out.signed_nlos.push_back(r);
        }
      }
    }
  }
  const std::size_t total = abs_all.size();
  out.los = class_stats(std::move(abs_los), total);
  out.nlos = class_stats(std::move(abs_nlos), total);
  out.overall = class_stats(std::move(abs_all), total);
  return out;
}

PairwiseRmse pairwise_rmse_matrix(const std::vector<DistanceMatrix>& dataset,
                                  const NetworkTruth& truth) {
  check_truth(dataset, truth);
  const int n = truth.size();
  PairwiseRmse out;
  out.n = n;
  out.rmse.assign(static_cast<std::size_t>(n) * n, kNaN);
  out.counts.assign(static_cast<std::size_t>(n) * n, 0);

  std::vector<double> sq(static_cast<std::size_t>(n) * n, 0.0);
  for (const auto& m : dataset) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (!m.has(i, j)) continue;
        const double r = m.at(i, j) - true_distance(truth, i, j);
        const std::size_t k = static_cast<std::size_t>(i) * n + j;
        sq[k] += r * r;
        ++out.counts[k];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * n + j;
      const std::size_t km = static_cast<std::size_t>(j) * n + i;
      out.counts[km] = out.counts[k];
      if (out.counts[k] == 0) continue;
      const double v = std::sqrt(sq[k] / out.counts[k]);
      out.rmse[k] = v;
      out.rmse[km] = v;
    }
  }
  for (int i = 0; i < n; ++i) out.rmse[static_cast<std::size_t>(i) * n + i] = 0.0;
  return out;
}

QqResult qq_correlation(const std::vector<DistanceMatrix>& dataset,
                        const NetworkTruth& truth) {
  check_truth(dataset, truth);
  std::vector<double> ref, meas;
  for (const auto& m : dataset) {
    const int n = m.size();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (m.has(i, j)) {
          ref.push_back(true_distance(truth, i, j));
          meas.push_back(m.at(i, j));
        }
  }
  if (meas.size() < 2)
    throw InsufficientData("need at least two measurements for a Q-Q fit");

  std::sort(ref.begin(), ref.end());
  std::sort(meas.begin(), meas.end());

  const std::size_t n = meas.size();
  double mr = 0.0, mm = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mr += ref[k];
    mm += meas[k];
  }
  mr /= n;
  mm /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (ref[k] - mr) * (ref[k] - mr);
    sxy += (ref[k] - mr) * (meas[k] - mm);
    syy += (meas[k] - mm) * (meas[k] - mm);
  }

  QqResult out;
  if (syy <= 0.0 || sxx <= 0.0) {
    out.degenerate = true;
    out.r_squared = 0.0;
  } else {
    const double slope = sxy / sxx;
    const double ss_res = syy - slope * sxy;
    out.r_squared = 1.0 - ss_res / syy;
  }
  out.reference_q.reserve(101);
  out.measured_q.reserve(101);
  for (int p = 0; p <= 100; ++p) {
    const double h = (n - 1) * p / 100.0;
    const std::size_t i = static_cast<std::size_t>(h);
    auto lerp = [&](const std::vector<double>& v) {
      if (i + 1 >= v.size()) return v.back();
      return v[i] + (h - i) * (v[i + 1] - v[i]);
    };
    out.reference_q.push_back(lerp(ref));
    out.measured_q.push_back(lerp(meas));
  }
  return out;
}

std::vector<double> availability(const std::vector<cf::EpochResult>& results) {
  if (results.empty()) throw InsufficientData("availability of zero epochs");
  const std::size_t n = results.front().available.size();
  std::vector<double> out(n, 0.0);
  for (const auto& r : results)
    for (std::size_t i = 0; i < n; ++i)
      if (r.available[i]) out[i] += 1.0;
  for (auto& v : out) v /= results.size();
  return out;
}

namespace {

MethodConfigReport report_one(const std::string& method, std::size_t config_idx,
                              const std::vector<cf::EpochResult>& results,
                              const std::vector<Position2D>& truth_frame) {
  MethodConfigReport rep;
  rep.method = method;
  rep.config_index = config_idx;
  const std::size_t n = truth_frame.size();
  rep.nodes.resize(n);

  std::vector<double> sq(n, 0.0);
  double pooled_sq = 0.0;
  std::size_t pooled_count = 0;
  for (const auto& r : results) {
    if (r.available.size() != n)
      throw Error("result node count does not match the ground truth");
    for (std::size_t i = 0; i < n; ++i) {
      if (!r.available[i] || !r.estimates[i]) continue;
      const double e = distance(*r.estimates[i], truth_frame[i]);
      sq[i] += e * e;
      ++rep.nodes[i].epochs_used;
      rep.ecdf_errors.push_back(e);
      pooled_sq += e * e;
      ++pooled_count;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    rep.nodes[i].availability =
        results.empty() ? 0.0
                        : static_cast<double>(rep.nodes[i].epochs_used) /
                              results.size();
    rep.nodes[i].rmse = rep.nodes[i].epochs_used
                            ? std::sqrt(sq[i] / rep.nodes[i].epochs_used)
                            : kNaN;
  }
  std::sort(rep.ecdf_errors.begin(), rep.ecdf_errors.end());
  rep.all_node_rmse = pooled_count ? std::sqrt(pooled_sq / pooled_count) : kNaN;
  return rep;
}

std::vector<double> cross_config_delta(
    const std::vector<const MethodConfigReport*>& entries, std::size_t n) {
  std::vector<double> delta(n, kNaN);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    bool any = false;
    bool all = true;
    for (const auto* e : entries) {
      const double v = e->nodes[i].rmse;
      if (std::isnan(v)) {
        all = false;
        continue;
      }
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      any = true;
    }
    // The spread is only meaningful when the node has an RMSE under every
    // configuration; partial coverage is reported as NaN.
    if (any && all) delta[i] = hi - lo;
  }
  return delta;
}

}  // namespace

PositioningReport positioning_report(
    const std::vector<std::vector<cf::EpochResult>>& cf_by_config,
    const std::vector<std::vector<cf::EpochResult>>& pgp_by_config,
    const std::vector<Position2D>& truth_raw,
    const std::vector<cf::FrameAssumptions>& configurations) {
  if (truth_raw.empty()) throw NoTruth("no ground truth positions");
  if (cf_by_config.size() != configurations.size() ||
      pgp_by_config.size() != configurations.size())
    throw Error("result sets and configurations are misaligned");

  PositioningReport report;
  const std::size_t n = truth_raw.size();
  for (std::size_t c = 0; c < configurations.size(); ++c) {
    const auto truth_frame = io::transform_ground_truth(truth_raw, configurations[c]);
    if (!cf_by_config[c].empty())
      report.entries.push_back(report_one("cf", c, cf_by_config[c], truth_frame));
    if (!pgp_by_config[c].empty())
      report.entries.push_back(report_one("pgp", c, pgp_by_config[c], truth_frame));
  }

  std::vector<const MethodConfigReport*> cf_entries, pgp_entries;
  for (const auto& e : report.entries) {
    (e.method == "cf" ? cf_entries : pgp_entries).push_back(&e);
  }
  if (cf_entries.size() >= 2) {
    report.cf_delta = cross_config_delta(cf_entries, n);
    for (double d : report.cf_delta)
      if (!std::isnan(d)) report.cf_max_delta = std::max(report.cf_max_delta, d);
  }
  if (pgp_entries.size() >= 2) {
    report.pgp_delta = cross_config_delta(pgp_entries, n);
    for (double d : report.pgp_delta)
      if (!std::isnan(d))
        report.pgp_max_delta = std::max(report.pgp_max_delta, d);
  }
  report.pgp_spread_smaller = !report.cf_delta.empty() &&
                              !report.pgp_delta.empty() &&
                              report.pgp_max_delta < report.cf_max_delta;
  return report;
}

}  // namespace meshcal::eval
