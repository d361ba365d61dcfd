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

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spkback/data_model.hpp"

namespace spkback {

struct DcfParams {
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const;
  /// log(c_fa (1 - p) / (c_miss p)).
  double bayes_threshold() const;
};

/// Default operating points, averaged: p_target 0.01 and 0.005 at unit costs.
std::vector<DcfParams> default_dcf_params();

/// Miss and false-alarm rates over every distinct decision on a score set.
/// Thresholds are -inf, the midpoints between adjacent distinct scores, and
/// +inf; a trial is accepted as target when score >= threshold.
struct ErrorProfile {
  std::vector<double> thresholds;
  std::vector<double> p_miss;
  std::vector<double> p_fa;
  std::vector<std::size_t> misses;
  std::vector<std::size_t> false_alarms;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;

  std::size_t size() const { return thresholds.size(); }
};

/// Scores are joined to the key by trial identity; scores for unkeyed
/// trials are ignored.
ErrorProfile error_profile(const ScoreSet& scores, const TrialKey& key);

/// Crossing of p_miss and p_fa on the piecewise-linear path through the
/// profile vertices.
double eer(const ErrorProfile& profile);

/// c_miss p_tar p_miss + c_fa (1 - p_tar) p_fa divided by
/// min(c_miss p_tar, c_fa (1 - p_tar)).
double normalized_dcf(std::size_t misses, std::size_t false_alarms, std::size_t n_target,
                      std::size_t n_nontarget, const DcfParams& params);

struct MinDcf {
  double value = 0.0;
  double threshold = 0.0;
};

/// Minimum over profile thresholds; ties go to the lower threshold.
MinDcf min_dcf(const ErrorProfile& profile, const DcfParams& params);

/// Normalized DCF at the Bayes threshold, treating scores as LLRs.
double act_dcf(const ScoreSet& scores, const TrialKey& key, const DcfParams& params);

/// Mean min_dcf over the operating points.
double primary_dcf(const ScoreSet& scores, const TrialKey& key,
                   const std::vector<DcfParams>& params_list);

/// Mean act_dcf over the operating points.
double primary_act_dcf(const ScoreSet& scores, const TrialKey& key,
                       const std::vector<DcfParams>& params_list);

/// (p_miss, p_fa) vertices in threshold order.
std::vector<std::pair<double, double>> det_points(const ErrorProfile& profile);

struct SystemReport {
  std::string system;
  double eer = 0.0;
  double min_dcf = 0.0;
  std::optional<double> act_dcf;
};

SystemReport evaluate_system(const std::string& name, const ScoreSet& scores, const TrialKey& key,
                             const std::vector<DcfParams>& params_list, bool with_act_dcf = true);

/// Aligned table, EER as a percentage with 2 decimals and DCFs with 3;
/// a missing actDCF prints as "-".
std::string format_report(const std::vector<SystemReport>& rows);
std::string format_report_tsv(const std::vector<SystemReport>& rows);

}  // namespace spkback
