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

#include "spkback/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "spkback/bench.hpp"
#include "spkback/fusion.hpp"
#include "spkback/io.hpp"
#include "spkback/kernel.hpp"
#include "spkback/metrics.hpp"
#include "spkback/plda.hpp"
#include "spkback/scoring.hpp"
#include "spkback/synth.hpp"
#include "spkback/transforms.hpp"

namespace spkback::cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string config;
  std::string output_format = "text";
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) return;
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw DataError(std::string(what) + " '" + path + "' does not exist or is not a file");
  }
}

EmbeddingFormat parse_format(const std::string& f) {
  return f == "text" ? EmbeddingFormat::kText : EmbeddingFormat::kBinary;
}

// `key=value` lines; keys name long flags of the selected subcommand or
// the global options, with '_' accepted for '-'.
std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open config '" + path + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](const std::string& s) {
      auto a = s.find_first_not_of(" \t");
      auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

// Config entries become `--key=value` tokens for options that are not on
// the command line: global ones ahead of the subcommand, others after it.
std::vector<std::string> inject_config(const CLI::App& app, const std::vector<std::string>& args) {
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  require_file(config, "config file");
  const auto kv = read_config(config);

  std::size_t sub_pos = args.size();
  const CLI::App* sub = nullptr;
  for (std::size_t i = 0; i < args.size() && !sub; ++i) {
    for (const CLI::App* s : app.get_subcommands({})) {
      if (s->get_name() == args[i]) {
        sub = s;
        sub_pos = i;
        break;
      }
    }
  }
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.starts_with(flag + "=");
    });
  };
  std::vector<std::string> global_extra, sub_extra;
  for (const auto& [key, value] : kv) {
    if (key == "config" || given(key)) continue;
    if (sub && sub->get_option_no_throw("--" + key)) {
      sub_extra.push_back("--" + key + "=" + value);
    } else if (app.get_option_no_throw("--" + key)) {
      global_extra.push_back("--" + key + "=" + value);
    }
  }
  std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos));
  out.insert(out.end(), global_extra.begin(), global_extra.end());
  out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos), args.end());
  out.insert(out.end(), sub_extra.begin(), sub_extra.end());
  return out;
}

std::vector<DcfParams> dcf_list(const std::vector<double>& priors, double c_miss, double c_fa) {
  std::vector<DcfParams> out;
  for (double p : priors) {
    DcfParams d{p, c_miss, c_fa};
    d.validate();
    out.push_back(d);
  }
  if (out.empty()) throw DataError("at least one DCF prior is required");
  return out;
}

struct NamedScores {
  std::string name;
  std::string path;
};

NamedScores split_named(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq != std::string::npos && eq > 0) return {spec.substr(0, eq), spec.substr(eq + 1)};
  return {fs::path(spec).stem().string(), spec};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker-verification back-end: LDA, PLDA, cosine, AS-norm, fusion, metrics",
               "spkback"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for trial-parallel stages (0 = all cores)")
      ->capture_default_str();
  app.add_option("--config", g.config, "key=value file supplying defaults for long flags");
  app.add_option("--output-format", g.output_format, "Report format")
      ->check(CLI::IsMember({"text", "tsv"}))
      ->capture_default_str();

  // gen
  auto* gen = app.add_subcommand("gen", "Generate embeddings from the two-covariance model");
  std::size_t gen_dim = 0, gen_speakers = 0, gen_utts = 0;
  std::string gen_between = "iso:1", gen_within = "iso:1", gen_mean = "zero", gen_prefix = "spk";
  std::string gen_out, gen_format = "binary", gen_trials;
  std::size_t gen_enroll_utts = 1, gen_nontargets = 10;
  bool gen_unlabeled = false;
  gen->add_option("--dim", gen_dim, "Embedding dimension")->required();
  gen->add_option("--speakers", gen_speakers, "Number of speakers")->required();
  gen->add_option("--utts-per-speaker", gen_utts, "Utterances per speaker")->required();
  gen->add_option("--between", gen_between, "Between-speaker covariance: iso:v, diag:v1,..., or matrix file")
      ->capture_default_str();
  gen->add_option("--within", gen_within, "Within-speaker covariance: iso:v, diag:v1,..., or matrix file")
      ->capture_default_str();
  gen->add_option("--mean", gen_mean, "Global mean: zero, fill:v, sparse:i=v,..., or v1,v2,...")
      ->capture_default_str();
  gen->add_option("--prefix", gen_prefix, "Speaker id prefix")->capture_default_str();
  gen->add_option("--out", gen_out, "Output embedding file")->required();
  gen->add_option("--format", gen_format)->check(CLI::IsMember({"binary", "text"}))->capture_default_str();
  gen->add_flag("--unlabeled", gen_unlabeled, "Drop speaker labels from the output");
  gen->add_option("--trials", gen_trials, "Also write <prefix>.enroll, <prefix>.trials, <prefix>.key");
  gen->add_option("--enroll-utts", gen_enroll_utts, "Enrollment utterances per model")->capture_default_str();
  gen->add_option("--nontargets", gen_nontargets, "Nontarget trials per model")->capture_default_str();

  // train-lda
  auto* tlda = app.add_subcommand("train-lda", "Fit an LDA projection");
  std::string tlda_in, tlda_out;
  std::size_t lda_dim = 150;
  std::optional<double> lda_ridge;
  tlda->add_option("--in", tlda_in, "Labeled embeddings")->required();
  tlda->add_option("--lda-dim", lda_dim, "Output dimension")->capture_default_str();
  tlda->add_option("--ridge", lda_ridge, "Within-class ridge (default 1e-6 * trace / dim)");
  tlda->add_option("--out", tlda_out, "Output LDA file")->required();

  // transform
  auto* xform = app.add_subcommand("transform", "Apply LDA and/or length normalization");
  std::string x_in, x_out, x_lda, x_format = "binary";
  bool x_lnorm = false;
  xform->add_option("--in", x_in)->required();
  xform->add_option("--out", x_out)->required();
  xform->add_option("--lda", x_lda, "LDA file");
  xform->add_flag("--length-norm", x_lnorm, "Scale every vector to norm sqrt(dim)");
  xform->add_option("--format", x_format)->check(CLI::IsMember({"binary", "text"}))->capture_default_str();

  // train-plda
  auto* tplda = app.add_subcommand("train-plda", "Train a two-covariance PLDA model by EM");
  std::string tp_in, tp_out;
  PldaTrainOptions tp_opts;
  tplda->add_option("--in", tp_in, "Labeled embeddings")->required();
  tplda->add_option("--out", tp_out, "Output PLDA file")->required();
  tplda->add_option("--iters", tp_opts.max_iters)->check(CLI::PositiveNumber)->capture_default_str();
  tplda->add_option("--tol", tp_opts.tol)->check(CLI::PositiveNumber)->capture_default_str();

  // adapt-plda
  auto* aplda = app.add_subcommand("adapt-plda", "Adapt a PLDA model to unlabeled in-domain data");
  std::string ap_model, ap_in, ap_out;
  double alpha = 0.5;
  aplda->add_option("--model", ap_model)->required();
  aplda->add_option("--in", ap_in, "In-domain embeddings")->required();
  aplda->add_option("--alpha", alpha, "Adaptation strength")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  aplda->add_option("--out", ap_out)->required();

  // score
  auto* score = app.add_subcommand("score", "Score trials with PLDA or cosine");
  std::string sc_kernel = "plda", sc_model, sc_emb, sc_enroll, sc_trials, sc_out;
  score->add_option("--kernel", sc_kernel)->check(CLI::IsMember({"plda", "cosine"}))->capture_default_str();
  score->add_option("--model", sc_model, "PLDA model (plda kernel)");
  score->add_option("--embeddings", sc_emb)->required();
  score->add_option("--enroll", sc_enroll, "Enrollment map (default: each utterance is a model)");
  score->add_option("--trials", sc_trials)->required();
  score->add_option("--out", sc_out)->required();

  // snorm
  auto* snorm = app.add_subcommand("snorm", "Adaptive symmetric score normalization");
  std::string sn_scores, sn_kernel = "plda", sn_model, sn_emb, sn_enroll, sn_cohort, sn_out;
  double top_fraction = 0.30;
  snorm->add_option("--scores", sn_scores, "Raw scores")->required();
  snorm->add_option("--kernel", sn_kernel)->check(CLI::IsMember({"plda", "cosine"}))->capture_default_str();
  snorm->add_option("--model", sn_model, "PLDA model (plda kernel)");
  snorm->add_option("--embeddings", sn_emb)->required();
  snorm->add_option("--enroll", sn_enroll);
  snorm->add_option("--cohort", sn_cohort, "Cohort embeddings")->required();
  snorm->add_option("--top-fraction", top_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  snorm->add_option("--out", sn_out)->required();

  // calibrate / fuse share their options
  struct FuseArgs {
    std::vector<std::string> scores;
    std::string key, model_in, model_out, out;
    double prior = 0.05, ridge = 0.0, manual_offset = 0.0;
  };
  FuseArgs cal_args, fuse_args;
  auto add_fuse_options = [](CLI::App* sub, FuseArgs& a, bool many) {
    auto* s = sub->add_option("--scores", a.scores, "Score file(s)")->required();
    if (!many) s->expected(1);
    sub->add_option("--key", a.key, "Trial key (training)");
    sub->add_option("--model", a.model_in, "Apply an existing calibration model instead of training");
    sub->add_option("--model-out", a.model_out, "Write the trained calibration model");
    sub->add_option("--out", a.out, "Calibrated/fused scores");
    sub->add_option("--prior", a.prior, "Effective prior")->check(CLI::Range(0.0, 1.0))->capture_default_str();
    sub->add_option("--ridge", a.ridge)->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--manual-offset", a.manual_offset)->capture_default_str();
  };
  auto* cal = app.add_subcommand("calibrate", "Affine calibration of one system");
  add_fuse_options(cal, cal_args, false);
  auto* fuse = app.add_subcommand("fuse", "Linear logistic-regression fusion");
  add_fuse_options(fuse, fuse_args, true);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "EER, minDCF and actDCF report");
  std::vector<std::string> ev_scores;
  std::string ev_key;
  std::vector<double> priors = {0.01, 0.005};
  double c_miss = 1.0, c_fa = 1.0;
  bool no_act = false;
  eval->add_option("--scores", ev_scores, "Score file(s), optionally name=path")->required();
  eval->add_option("--key", ev_key)->required();
  eval->add_option("--p-target", priors, "Target priors (averaged)")->delimiter(',')->capture_default_str();
  eval->add_option("--c-miss", c_miss)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_option("--c-fa", c_fa)->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_flag("--no-act", no_act, "Print '-' for actDCF (uncalibrated scores)");

  // det
  auto* det = app.add_subcommand("det", "Export ROC/DET operating points");
  std::string det_scores, det_key, det_out;
  det->add_option("--scores", det_scores)->required();
  det->add_option("--key", det_key)->required();
  det->add_option("--out", det_out, "Output file (default: stdout)");

  // bench
  auto* bench = app.add_subcommand("bench", "Scoring throughput for both kernels with and without s-norm");
  BenchConfig bc;
  std::string bench_model;
  bench->add_option("--model", bench_model, "PLDA model (default: synthetic at --dim)");
  bench->add_option("--dim", bc.dim)->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--num-trials", bc.trials)->capture_default_str();
  bench->add_option("--utterances", bc.utterances)->capture_default_str();
  bench->add_option("--cohort-size", bc.cohort)->capture_default_str();
  bench->add_option("--top-fraction", bc.top_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();

  try {
    const auto full = inject_config(app, args);
    std::vector<std::string> reversed(full.rbegin(), full.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const bool tsv = g.output_format == "tsv";

    if (sub == gen) {
      GenerativeConfig c;
      c.dim = gen_dim;
      c.n_speakers = gen_speakers;
      c.utts_per_speaker = gen_utts;
      if (gen_dim == 0) throw DataError("--dim must be positive");
      c.between_cov = parse_covariance_spec(gen_between, gen_dim);
      c.within_cov = parse_covariance_spec(gen_within, gen_dim);
      c.global_mean = parse_mean_spec(gen_mean, gen_dim);
      c.seed = g.seed;
      c.speaker_prefix = gen_prefix;
      EmbeddingSet set = generate(c);
      if (!gen_trials.empty()) {
        const TrialDesign design = make_trials(set, gen_enroll_utts, gen_nontargets, g.seed);
        write_enrollment(design.enrollment, gen_trials + ".enroll");
        write_trials(design.trials, gen_trials + ".trials");
        write_key(design.key, gen_trials + ".key");
      }
      write_embeddings(gen_unlabeled ? set.unlabeled() : set, gen_out, parse_format(gen_format));
    } else if (sub == tlda) {
      require_file(tlda_in, "embeddings");
      const LdaTransform lda = fit_lda(read_embeddings(tlda_in), lda_dim, lda_ridge);
      write_lda(lda, tlda_out);
    } else if (sub == xform) {
      require_file(x_in, "embeddings");
      require_file(x_lda, "LDA file");
      EmbeddingSet set = read_embeddings(x_in);
      if (!x_lda.empty()) set = apply_lda(read_lda(x_lda), set);
      if (x_lnorm) set = length_normalize(set);
      write_embeddings(set, x_out, parse_format(x_format));
    } else if (sub == tplda) {
      require_file(tp_in, "embeddings");
      const PldaTrainResult r = train_plda(read_embeddings(tp_in), tp_opts);
      for (const auto& w : r.warnings) err << "warning: " << w << '\n';
      err << "train-plda: " << r.iterations << " iteration(s), log-likelihood "
          << format_real(r.log_likelihood.back()) << (r.converged ? " (converged)" : "") << '\n';
      write_plda(r.model, tp_out);
    } else if (sub == aplda) {
      require_file(ap_model, "PLDA model");
      require_file(ap_in, "embeddings");
      write_plda(adapt_plda(read_plda(ap_model), read_embeddings(ap_in), alpha), ap_out);
    } else if (sub == score || sub == snorm) {
      const bool is_score = sub == score;
      const std::string& kernel_name = is_score ? sc_kernel : sn_kernel;
      const std::string& model_path = is_score ? sc_model : sn_model;
      const std::string& emb_path = is_score ? sc_emb : sn_emb;
      const std::string& enroll_path = is_score ? sc_enroll : sn_enroll;
      require_file(emb_path, "embeddings");
      require_file(enroll_path, "enrollment map");
      require_file(model_path, "PLDA model");
      if (kernel_name == "plda" && model_path.empty()) {
        throw DataError("--model is required with --kernel plda");
      }
      if (is_score) {
        require_file(sc_trials, "trial list");
      } else {
        require_file(sn_scores, "scores");
        require_file(sn_cohort, "cohort embeddings");
      }
      const Kernel kernel = kernel_name == "plda" ? Kernel::plda(read_plda(model_path)) : Kernel::cosine();
      const EmbeddingSet emb = read_embeddings(emb_path);
      const EnrollmentMap enroll =
          enroll_path.empty() ? EnrollmentMap::identity(emb) : read_enrollment(enroll_path);
      if (is_score) {
        const TrialList trials = read_trials(sc_trials);
        write_scores(score_trials(kernel, emb, enroll, trials, g.threads), sc_out);
      } else {
        const ScoreSet raw = read_scores(sn_scores);
        std::vector<Trial> trials = raw.trials();
        const TrialList trial_list(std::move(trials));
        const CohortScores cs = build_cohort_scores(kernel, emb, enroll, trial_list,
                                                    read_embeddings(sn_cohort), g.threads);
        write_scores(adaptive_snorm(raw, cs.enroll, cs.test, top_fraction, g.threads), sn_out);
      }
    } else if (sub == cal || sub == fuse) {
      FuseArgs& a = sub == cal ? cal_args : fuse_args;
      for (const auto& s : a.scores) require_file(s, "scores");
      require_file(a.key, "trial key");
      require_file(a.model_in, "calibration model");
      if (a.model_in.empty() && a.key.empty()) throw DataError("either --key (train) or --model (apply) is required");
      if (!(a.prior > 0.0 && a.prior < 1.0)) throw DataError("--prior must be in (0, 1)");
      std::vector<ScoreSet> sets;
      for (const auto& s : a.scores) sets.push_back(read_scores(s));
      CalibrationModel model;
      if (!a.model_in.empty()) {
        model = read_calibration(a.model_in);
      } else {
        model = train_fusion(sets, read_key(a.key), {a.prior, a.ridge});
      }
      if (!a.model_out.empty()) write_calibration(model, a.model_out);
      const ScoreSet fused = apply_fusion(model, sets, a.manual_offset);
      if (!a.out.empty()) write_scores(fused, a.out);
      if (a.model_in.empty()) {
        err << sub->get_name() << ": offset " << format_real(model.offset);
        for (std::size_t i = 0; i < model.weights.size(); ++i) {
          err << ", w_" << (i + 1) << ' ' << format_real(model.weights[i]);
        }
        err << '\n';
      }
    } else if (sub == eval) {
      require_file(ev_key, "trial key");
      std::vector<NamedScores> named;
      for (const auto& s : ev_scores) {
        named.push_back(split_named(s));
        require_file(named.back().path, "scores");
      }
      const auto params = dcf_list(priors, c_miss, c_fa);
      const TrialKey key = read_key(ev_key);
      std::vector<SystemReport> rows;
      for (const auto& n : named) {
        rows.push_back(evaluate_system(n.name, read_scores(n.path), key, params, !no_act));
      }
      out << (tsv ? format_report_tsv(rows) : format_report(rows));
    } else if (sub == det) {
      require_file(det_scores, "scores");
      require_file(det_key, "trial key");
      const ErrorProfile p = error_profile(read_scores(det_scores), read_key(det_key));
      std::ostringstream os;
      for (std::size_t i = 0; i < p.size(); ++i) {
        os << format_real(p.thresholds[i]) << '\t' << format_real(p.p_miss[i]) << '\t'
           << format_real(p.p_fa[i]) << '\n';
      }
      if (det_out.empty()) {
        out << os.str();
      } else {
        std::ofstream f(det_out, std::ios::trunc);
        if (!f) throw DataError("cannot open '" + det_out + "' for writing");
        f << os.str();
      }
    } else if (sub == bench) {
      require_file(bench_model, "PLDA model");
      if (!bench_model.empty()) bc.model = read_plda(bench_model);
      bc.threads = g.threads;
      bc.seed = g.seed;
      out << format_bench(run_benchmark(bc), tsv);
    }
    return kOk;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace spkback::cli
