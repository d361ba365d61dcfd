// Copyright 2026 The spkback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spkback/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace spkback {

void DcfParams::validate() const {
  if (!(p_target > 0.0 && p_target < 1.0)) throw DataError("DCF p_target must be in (0, 1)");
  if (!(c_miss > 0.0) || !(c_fa > 0.0)) throw DataError("DCF costs must be positive");
}

double DcfParams::bayes_threshold() const {
  return std::log(c_fa * (1.0 - p_target) / (c_miss * p_target));
}

std::vector<DcfParams> default_dcf_params() { return {{0.01, 1.0, 1.0}, {0.005, 1.0, 1.0}}; }

namespace {

struct LabeledScore {
  double score;
  bool target;
};

std::vector<LabeledScore> join(const ScoreSet& scores, const TrialKey& key) {
  key.require_both_classes();
  const auto s = scores.aligned_to(key.trials());
  std::vector<LabeledScore> out(key.size());
  for (std::size_t i = 0; i < key.size(); ++i) out[i] = {s[i], key.is_target(i)};
  return out;
}

}  // namespace

ErrorProfile error_profile(const ScoreSet& scores, const TrialKey& key) {
  auto trials = join(scores, key);
  std::sort(trials.begin(), trials.end(),
            [](const LabeledScore& a, const LabeledScore& b) { return a.score < b.score; });

  ErrorProfile p;
  p.n_target = key.num_targets();
  p.n_nontarget = key.num_nontargets();
  const double nt = static_cast<double>(p.n_target);
  const double nn = static_cast<double>(p.n_nontarget);
  auto push = [&](double threshold, std::size_t misses, std::size_t fas) {
    p.thresholds.push_back(threshold);
    p.misses.push_back(misses);
    p.false_alarms.push_back(fas);
    p.p_miss.push_back(static_cast<double>(misses) / nt);
    p.p_fa.push_back(static_cast<double>(fas) / nn);
  };

  std::size_t misses = 0;
  std::size_t fas = p.n_nontarget;
  push(-std::numeric_limits<double>::infinity(), misses, fas);
  std::size_t i = 0;
  while (i < trials.size()) {
    const double value = trials[i].score;
    for (; i < trials.size() && trials[i].score == value; ++i) {
      if (trials[i].target) {
        ++misses;
      } else {
        --fas;
      }
    }
    if (i == trials.size()) break;
    const double next = trials[i].score;
    double mid = value + 0.5 * (next - value);
    if (!(mid > value)) mid = next;  // adjacent doubles
    push(mid, misses, fas);
  }
  push(std::numeric_limits<double>::infinity(), p.n_target, 0);
  return p;
}

double eer(const ErrorProfile& profile) {
  const auto& pm = profile.p_miss;
  const auto& pf = profile.p_fa;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (pm[i] == pf[i]) return pm[i];
    if (pm[i] > pf[i]) {
      // Sign change between vertices i-1 and i; vertex 0 always has pm < pf.
      const double before = pf[i - 1] - pm[i - 1];
      const double after = pm[i] - pf[i];
      const double lambda = before / (before + after);
      return pm[i - 1] + lambda * (pm[i] - pm[i - 1]);
    }
  }
  return pm.back();
}

double normalized_dcf(std::size_t misses, std::size_t false_alarms, std::size_t n_target,
                      std::size_t n_nontarget, const DcfParams& params) {
  const double p_miss = static_cast<double>(misses) / static_cast<double>(n_target);
  const double p_fa = static_cast<double>(false_alarms) / static_cast<double>(n_nontarget);
  const double w_miss = params.c_miss * params.p_target;
  const double w_fa = params.c_fa * (1.0 - params.p_target);
  return (w_miss * p_miss + w_fa * p_fa) / std::min(w_miss, w_fa);
}

MinDcf min_dcf(const ErrorProfile& profile, const DcfParams& params) {
  params.validate();
  MinDcf best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const double v = normalized_dcf(profile.misses[i], profile.false_alarms[i], profile.n_target,
                                    profile.n_nontarget, params);
    if (v < best.value) best = {v, profile.thresholds[i]};
  }
  return best;
}

double act_dcf(const ScoreSet& scores, const TrialKey& key, const DcfParams& params) {
  params.validate();
  const auto trials = join(scores, key);
  const double threshold = params.bayes_threshold();
  std::size_t misses = 0;
  std::size_t fas = 0;
  for (const auto& t : trials) {
    if (t.target && t.score < threshold) ++misses;
    if (!t.target && t.score >= threshold) ++fas;
  }
  return normalized_dcf(misses, fas, key.num_targets(), key.num_nontargets(), params);
}

double primary_dcf(const ScoreSet& scores, const TrialKey& key,
                   const std::vector<DcfParams>& params_list) {
  if (params_list.empty()) throw DataError("primary DCF needs at least one operating point");
  const ErrorProfile profile = error_profile(scores, key);
  double sum = 0.0;
  for (const auto& p : params_list) sum += min_dcf(profile, p).value;
  return sum / static_cast<double>(params_list.size());
}

double primary_act_dcf(const ScoreSet& scores, const TrialKey& key,
                       const std::vector<DcfParams>& params_list) {
  if (params_list.empty()) throw DataError("primary DCF needs at least one operating point");
  double sum = 0.0;
  for (const auto& p : params_list) sum += act_dcf(scores, key, p);
  return sum / static_cast<double>(params_list.size());
}

std::vector<std::pair<double, double>> det_points(const ErrorProfile& profile) {
  std::vector<std::pair<double, double>> out;
  out.reserve(profile.size());
  for (std::size_t i = 0; i < profile.size(); ++i) out.emplace_back(profile.p_miss[i], profile.p_fa[i]);
  return out;
}

SystemReport evaluate_system(const std::string& name, const ScoreSet& scores, const TrialKey& key,
                             const std::vector<DcfParams>& params_list, bool with_act_dcf) {
  SystemReport r;
  r.system = name;
  r.eer = eer(error_profile(scores, key));
  r.min_dcf = primary_dcf(scores, key, params_list);
  if (with_act_dcf) r.act_dcf = primary_act_dcf(scores, key, params_list);
  return r;
}

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::vector<std::vector<std::string>> report_cells(const std::vector<SystemReport>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"system", "EER%", "minDCF", "actDCF"});
  for (const auto& r : rows) {
    cells.push_back({r.system, fixed(100.0 * r.eer, 2), fixed(r.min_dcf, 3),
                     r.act_dcf ? fixed(*r.act_dcf, 3) : "-"});
  }
  return cells;
}

}  // namespace

std::string format_report(const std::vector<SystemReport>& rows) {
  const auto cells = report_cells(rows);
  std::vector<std::size_t> width(4, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (c == 0) {
        out += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        out += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    out += '\n';
  }
  return out;
}

std::string format_report_tsv(const std::vector<SystemReport>& rows) {
  std::string out;
  for (const auto& row : report_cells(rows)) {
    out += row[0] + '\t' + row[1] + '\t' + row[2] + '\t' + row[3] + '\n';
  }
  return out;
}

}  // namespace spkback
