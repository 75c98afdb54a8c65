// pmop: train, apply and evaluate ranking models over ordered partitions.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#ifdef PMOP_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include <CLI11.hpp>
#endif

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pmop/pmop.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kUsageError = 1;
constexpr int kDataError = 2;
constexpr int kNumericError = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PMOP_SEED")) {
    if (auto v = pmop::parse_int<std::uint64_t>(env)) return *v;
    throw UsageError("PMOP_SEED must be a non-negative integer");
  }
  return 0;
}

struct TrainOptions {
  std::string data, loss, out;
  bool second_order = false;
  double corr_threshold = 0.15;
  std::optional<double> lr;
  std::optional<std::size_t> iters;
  std::optional<double> rel_tol;
  double l2 = 0.0;
  std::optional<std::string> sampler;
  std::size_t cd_steps = 1;
  std::size_t cd_samples = 1;
  bool mh_corrected = false;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
};

struct ApplyOptions {
  std::string data, model, out;
  std::string ndcg_at = "1,5";
  std::string qids;
};

struct OracleOptions {
  std::optional<std::size_t> fubini;
  std::optional<std::size_t> enumerate;
  std::vector<std::uint64_t> normalize_check;
};

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pmop::DataError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw pmop::DataError("failed writing '" + path + "'");
}

int run_train(const TrainOptions& o) {
  if (!pmop::is_known_loss(o.loss)) throw UsageError("unknown loss '" + o.loss + "'");
  const bool stochastic = pmop::is_stochastic_loss(o.loss);
  if (o.sampler && !stochastic) throw UsageError("--sampler only applies to pmop-gibbs and pmop-mh");
  const std::string loss_sampler = o.loss == "pmop-mh" ? "mh" : "gibbs";
  if (o.sampler && *o.sampler != loss_sampler) {
    throw UsageError("--sampler " + *o.sampler + " conflicts with --loss " + o.loss);
  }

  const auto raw = pmop::parse_letor_file(o.data);
  if (auto v = pmop::validate_dataset(raw); !v.empty()) {
    throw pmop::DataError("query " + v.front().query_id + ": " + v.front().description);
  }
  auto pipeline = pmop::fit_normalizer(raw);
  if (o.second_order) pipeline = pmop::build_second_order(pmop::apply_normalizer(pipeline, raw), pipeline, o.corr_threshold);
  const auto data = pmop::transform(pipeline, raw);

  pmop::TrainConfig cfg = stochastic ? pmop::TrainConfig::sgd_defaults() : pmop::TrainConfig::lbfgs_defaults();
  if (o.lr) cfg.learning_rate = *o.lr;
  if (o.iters) cfg.max_iters = *o.iters;
  if (o.rel_tol) cfg.rel_tol = *o.rel_tol;
  cfg.l2_lambda = o.l2;
  cfg.seed = o.seed ? *o.seed : default_seed();
  cfg.threads = o.threads;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  pmop::TrainReport report;
  if (stochastic) {
    pmop::CdConfig cd;
    cd.sampler = o.loss == "pmop-mh" ? pmop::Sampler::mh : pmop::Sampler::gibbs;
    cd.mcmc_steps = o.cd_steps;
    cd.n_samples = o.cd_samples;
    cd.mh_acceptance = o.mh_corrected ? pmop::MhAcceptance::corrected : pmop::MhAcceptance::verbatim;
    if (cd.mcmc_steps < 1 || cd.n_samples < 1) throw UsageError("--cd-steps and --cd-samples must be >= 1");
    report = pmop::train_stochastic(data, pmop::CdGradient(cd, cfg.seed), cfg);
  } else {
    const auto loss = pmop::make_loss(o.loss);
    report = pmop::train_batch(data, *loss, cfg);
  }

  for (std::size_t i = 0; i < report.objective_trace.size(); ++i) {
    std::cout << "iter " << (i + 1) << " objective " << pmop::format_real(report.objective_trace[i]) << "\n";
  }
  std::cout << "stop_reason=" << pmop::to_string(report.stop_reason) << "\n";

  const std::string pipeline_path = o.out + ".pipeline";
  std::ostringstream pipe_text;
  pmop::save_pipeline(pipe_text, pipeline);
  write_file(pipeline_path, pipe_text.str());

  pmop::ModelFile model;
  model.loss = o.loss;
  model.weights.assign(report.weights().begin(), report.weights().end());
  if (o.loss == "ties-rk") model.alpha = report.extra()[0];
  if (o.loss == "ties-d") model.beta = report.extra()[0];
  model.pipeline = fs::path(pipeline_path).filename().string();
  std::ostringstream model_text;
  pmop::write_model(model_text, model);
  write_file(o.out, model_text.str());
  return 0;
}

struct LoadedModel {
  pmop::ModelFile model;
  std::optional<pmop::FeaturePipeline> pipeline;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel lm{pmop::read_model_file(path), std::nullopt};
  if (lm.model.pipeline) {
    const fs::path p = fs::path(path).parent_path() / *lm.model.pipeline;
    std::ifstream in(p);
    if (!in) {
      throw pmop::DataError("model '" + path + "' needs feature pipeline '" + p.string() +
                            "', which cannot be opened; features would not match");
    }
    lm.pipeline = pmop::load_pipeline(in, p.string());
  }
  return lm;
}

pmop::Dataset prepare(const LoadedModel& lm, const std::string& data_path) {
  auto data = pmop::parse_letor_file(data_path);
  if (lm.pipeline) data = pmop::transform(*lm.pipeline, data);
  if (data.feature_count != lm.model.feature_count()) {
    throw pmop::DimensionError("feature-count mismatch: model has " + std::to_string(lm.model.feature_count()) +
                               " features, data has " + std::to_string(data.feature_count));
  }
  return data;
}

int run_predict(const ApplyOptions& o) {
  const auto lm = load_model(o.model);
  const auto data = prepare(lm, o.data);
  std::ostringstream out;
  for (const auto& g : data.groups) {
    const pmop::ScoreCache cache(g, lm.model.weights);
    const auto order = pmop::rank_by_scores(cache.scores);
    out << g.query_id << '\t';
    for (std::size_t i = 0; i < order.size(); ++i) out << (i ? " " : "") << order[i];
    out << '\t';
    for (std::size_t i = 0; i < order.size(); ++i) out << (i ? " " : "") << pmop::format_real(cache.scores[order[i]]);
    out << '\n';
  }
  write_file(o.out, out.str());
  return 0;
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto v = pmop::parse_int<std::size_t>(item);
    if (!v || *v < 1) throw UsageError("bad --ndcg-at entry '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError("--ndcg-at needs at least one cutoff");
  return out;
}

int run_eval(const ApplyOptions& o) {
  const auto cutoffs = parse_cutoffs(o.ndcg_at);
  const auto lm = load_model(o.model);
  auto data = prepare(lm, o.data);
  if (!o.qids.empty()) {
    std::vector<std::string> wanted;
    std::stringstream ss(o.qids);
    for (std::string q; std::getline(ss, q, ',');) wanted.push_back(q);
    std::erase_if(data.groups, [&](const pmop::QueryGroup& g) {
      return std::find(wanted.begin(), wanted.end(), g.query_id) == wanted.end();
    });
    if (data.groups.empty()) throw pmop::DataError("none of the requested qids occur in '" + o.data + "'");
  }
  const auto report = pmop::evaluate(data, lm.model.weights, cutoffs, pmop::grade_ceiling(data));
  std::cout << report.to_key_values();
  return 0;
}

int run_oracle(const OracleOptions& o) {
  const int chosen = (o.fubini ? 1 : 0) + (o.enumerate ? 1 : 0) + (o.normalize_check.empty() ? 0 : 1);
  if (chosen != 1) throw UsageError("choose exactly one of --fubini, --enumerate, --normalize-check");

  if (o.fubini) {
    if (*o.fubini < 1 || *o.fubini > 1000) throw UsageError("--fubini N needs 1 <= N <= 1000");
    std::cout << pmop::fubini(*o.fubini) << "\n";
    return 0;
  }
  if (o.enumerate) {
    if (*o.enumerate < 1 || *o.enumerate > pmop::kMaxEnumeration) {
      throw UsageError("--enumerate N needs 1 <= N <= " + std::to_string(pmop::kMaxEnumeration));
    }
    pmop::enumerate_ordered_partitions(*o.enumerate).for_each([](const pmop::OrderedPartition& p) {
      std::cout << pmop::format_partition(p) << "\n";
    });
    return 0;
  }

  const std::size_t n = o.normalize_check[0];
  if (n < 1 || n > pmop::kMaxExactModel) {
    throw UsageError("--normalize-check N needs 1 <= N <= " + std::to_string(pmop::kMaxExactModel));
  }
  pmop::Rng rng(pmop::splitmix64(o.normalize_check[1]));
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr std::size_t F = 3;
  pmop::QueryGroup g;
  g.query_id = "oracle";
  for (std::size_t i = 0; i < n; ++i) {
    pmop::FeatureVector x(F);
    for (double& v : x) v = normal(rng);
    g.docs.push_back(std::move(x));
    g.labels.push_back(0);
  }
  std::vector<double> w(F);
  for (double& v : w) v = normal(rng);

  std::cout << "partitions=" << pmop::fubini(n) << "\n";
  for (auto model : {pmop::PotentialModel::fd, pmop::PotentialModel::general}) {
    double sum = 0.0;
    for (const auto& [part, p] : pmop::exact_model_distribution(g, w, model)) sum += p;
    std::cout << (model == pmop::PotentialModel::fd ? "fd_sum=" : "general_sum=") << pmop::format_real(sum) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learning to rank with probabilistic models over ordered partitions"};
  app.require_subcommand(1);

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Fit a ranking model on a LETOR file");
  train_cmd->add_option("--data", train.data, "Training data (LETOR format)")->required();
  train_cmd->add_option("--loss", train.loss,
                        "pmop-fd | pmop-gibbs | pmop-mh | listmle | ranknet | ranksvm | rankreg | ties-rk | ties-d")
      ->required();
  train_cmd->add_option("--out", train.out, "Model file to write; the pipeline goes to <out>.pipeline")->required();
  train_cmd->add_flag("--second-order", train.second_order, "Add selected pairwise-product features");
  train_cmd->add_option("--corr-threshold", train.corr_threshold, "Second-order selection threshold")
      ->capture_default_str();
  train_cmd->add_option("--lr", train.lr, "SGD learning rate (default 0.1)");
  train_cmd->add_option("--iters", train.iters, "Iterations (L-BFGS, default 100) or epochs (SGD, default 1000)");
  train_cmd->add_option("--rel-tol", train.rel_tol, "L-BFGS relative-improvement stop (default 1e-5)");
  train_cmd->add_option("--l2", train.l2, "L2 penalty on the weights")->capture_default_str();
  train_cmd->add_option("--sampler", train.sampler, "gibbs | mh (must agree with --loss)");
  train_cmd->add_option("--cd-steps", train.cd_steps, "MCMC transitions per CD sample")->capture_default_str();
  train_cmd->add_option("--cd-samples", train.cd_samples, "CD samples per stage")->capture_default_str();
  train_cmd->add_flag("--mh-corrected", train.mh_corrected, "Use the proposal-corrected MH acceptance");
  train_cmd->add_option("--seed", train.seed, "Random seed (default $PMOP_SEED or 0)");
  train_cmd->add_option("--threads", train.threads, "Worker threads for batch gradients")->capture_default_str();

  ApplyOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "Rank documents with a trained model");
  predict_cmd->add_option("--data", predict.data)->required();
  predict_cmd->add_option("--model", predict.model)->required();
  predict_cmd->add_option("--out", predict.out)->required();

  ApplyOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Report mean ERR and NDCG@T");
  eval_cmd->add_option("--data", eval.data)->required();
  eval_cmd->add_option("--model", eval.model)->required();
  eval_cmd->add_option("--ndcg-at", eval.ndcg_at, "Comma-separated cutoffs")->capture_default_str();
  eval_cmd->add_option("--qids", eval.qids, "Comma-separated qids to restrict evaluation to");

  OracleOptions oracle;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact combinatorial checks");
  oracle_cmd->add_option("--fubini", oracle.fubini, "Print Fubini(N)");
  oracle_cmd->add_option("--enumerate", oracle.enumerate, "List every ordered partition of N objects");
  oracle_cmd->add_option("--normalize-check", oracle.normalize_check, "N SEED: sum exact model probabilities")
      ->expected(2);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*predict_cmd) return run_predict(predict);
    if (*eval_cmd) return run_eval(eval);
    if (*oracle_cmd) return run_oracle(oracle);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const pmop::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const pmop::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}
