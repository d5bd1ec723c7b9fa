#include "localembed/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "localembed/eval.hpp"
#include "localembed/io.hpp"
#include "localembed/neighbors.hpp"
#include "localembed/pipeline.hpp"
#include "localembed/tuning.hpp"

namespace localembed {
namespace {

using Clock = std::chrono::steady_clock;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

struct HyperFlags {
  HyperParams h;
  std::string metric = "euclidean";
  bool no_backoff = false;
  std::uint64_t seed = 42;
};

struct Options {
  std::string data;
  std::string model;
  std::string output;
  bool one_indexed = false;
  bool verbose = false;
  HyperFlags hyper;

  // predict / eval
  std::size_t top = 5;
  std::vector<std::size_t> ks{1, 3, 5};
  std::size_t k_nn_override = 0;
  std::size_t threads = 1;

  // eval --grid
  bool grid = false;
  std::string train;
  std::string grid_output;
  double valid_fraction = 0.2;
  GridSpec grid_spec;

  // diag
  std::vector<std::size_t> l_hats{20, 50, 100};
  std::string histogram = "label_histogram.csv";

  // split
  std::string train_out;
  std::string test_out;
  std::size_t train_size = 0;
  double train_fraction = 0.5;
  std::string indices;
  std::string test_indices;
  std::size_t column = 0;
};

void add_common(CLI::App* app, Options& o) {
  app->add_flag("--one-indexed", o.one_indexed, "Feature indices in data files start at 1");
  app->add_flag("--verbose", o.verbose, "Print solver statistics");
}

void add_hyper(CLI::App* app, HyperFlags& f) {
  HyperParams& h = f.h;
  app->add_option("--l-hat", h.l_hat, "Embedding dimension")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--n-bar", h.n_bar, "Nearest training neighbors preserved per point")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--clusters", h.clusters, "k-means clusters per learner (default max(1, n/6000))")
      ->check(CLI::PositiveNumber);
  app->add_option("--k-nn", h.k_nn, "Neighbors used at prediction time")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--learners", h.num_learners, "Ensemble size")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--lambda", h.admm.lambda, "Ridge weight on the regressors")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--mu", h.admm.mu, "L1 weight on the predicted embeddings")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--rho", h.admm.rho, "ADMM penalty")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--admm-iters", h.admm.max_iters, "ADMM iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--admm-tol", h.admm.rel_tol, "ADMM relative residual tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_option("--eta", h.svp.eta, "SVP step size")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--svp-iters", h.svp.max_iters, "SVP iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--svp-tol", h.svp.rel_tol, "SVP relative objective change tolerance")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_flag("--no-backoff", f.no_backoff, "Keep the SVP step fixed even if the objective rises");
  app->add_option("--kmeans-iters", h.kmeans.max_iters, "Lloyd iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app->add_flag("--kmeans-plus-plus", h.kmeans.plus_plus, "Seed k-means with k-means++ instead of uniform points");
  app->add_flag("--normalize", h.kmeans.normalize, "Cluster on unit-normalized feature rows");
  app->add_option("--metric", f.metric, "kNN metric in embedding space")
      ->check(CLI::IsMember({"euclidean", "inner-product"}))
      ->capture_default_str();
  app->add_option("--sparsify", h.sparsify_threshold, "Drop regressor entries below this fraction of the largest")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app->add_option("--seed", f.seed, "Master random seed")->capture_default_str();
  app->add_option("--threads", h.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
}

HyperParams finalize(const HyperFlags& f) {
  HyperParams h = f.h;
  h.metric = f.metric == "inner-product" ? Metric::inner_product : Metric::euclidean;
  h.svp.step_backoff = !f.no_backoff;
  h.svp.l_hat = h.l_hat;
  try {
    h.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return h;
}

Dataset load(const std::string& path, const Options& o) {
  if (!std::filesystem::exists(path)) throw UsageError("no such file: " + path);
  return parse_xmc(path, ParseOptions{o.one_indexed});
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

void print_stats(const TrainStats& s, std::ostream& out) {
  out << fmt("clustering %.3fs\nsvp %.3fs\nadmm %.3fs\n", s.clustering_seconds, s.svp_seconds, s.admm_seconds);
}

void print_report(const EvalReport& r, std::ostream& out) {
  for (const auto& [k, p] : r.precision) out << fmt("P@%zu %.4f\n", k, p);
}

std::vector<std::size_t> usable_ks(const std::vector<std::size_t>& ks, std::size_t label_count) {
  std::vector<std::size_t> out;
  for (std::size_t k : ks) {
    if (k > label_count) throw UsageError("k=" + std::to_string(k) + " exceeds the label count");
    out.push_back(k);
  }
  return out;
}

int cmd_train(const Options& o, std::ostream& out) {
  const Dataset data = load(o.data, o);
  const HyperParams h = finalize(o.hyper);
  out << fmt("data %zu points, %zu features, %zu labels\n", data.num_points(), data.feature_dim(), data.label_count());
  TrainStats stats;
  const auto t0 = Clock::now();
  const Ensemble e = train_ensemble(data.features, data.labels, h, o.hyper.seed, &stats);
  const double total = seconds_since(t0);
  print_stats(stats, out);
  out << fmt("total %.3fs\n", total);
  if (o.verbose) {
    out << fmt("svp iterations %zu\nadmm iterations %zu\nadmm unconverged %zu\n", stats.svp_iterations,
               stats.admm_iterations, stats.admm_unconverged);
  }
  save_model(e, std::filesystem::path(o.model));
  out << fmt("model %s (%zu bytes, dense regressors %zu bytes)\n", o.model.c_str(), model_size_bytes(e),
             dense_model_size_bytes(e));
  return kExitOk;
}

Ensemble load_for_predict(const Options& o) {
  if (o.model.empty()) throw UsageError("--model is required");
  if (!std::filesystem::exists(o.model)) throw UsageError("no such model: " + o.model);
  Ensemble e = load_model(std::filesystem::path(o.model));
  if (o.k_nn_override > 0) e.hyper.k_nn = o.k_nn_override;
  e.hyper.threads = o.threads;
  return e;
}

int cmd_predict(const Options& o, std::ostream& out) {
  const Ensemble e = load_for_predict(o);
  const Dataset data = load(o.data, o);
  if (data.feature_dim() > e.feature_dim) throw UsageError("data feature dimension exceeds the model's");
  std::ofstream file;
  if (!o.output.empty()) file = open_out(o.output);
  std::ostream& sink = o.output.empty() ? out : file;
  for (std::size_t i = 0; i < data.num_points(); ++i) {
    const Prediction p = predict(e, data.features.row(i), o.top);
    for (std::size_t j = 0; j < p.labels.size(); ++j) {
      if (j > 0) sink << ' ';
      sink << fmt("%d:%.6f", static_cast<int>(p.labels[j]), p.scores[j]);
    }
    sink << '\n';
  }
  return kExitOk;
}

void write_grid_table(const GridResult& g, const std::string& path) {
  auto f = open_out(path);
  f << "n_bar,lambda,mu,k_nn,p_at_1,p_at_3,p_at_5\n";
  for (const auto& r : g.table)
    f << fmt("%zu,%g,%g,%zu,%.6f,%.6f,%.6f\n", r.n_bar, r.lambda, r.mu, r.k_nn, r.p_at_1, r.p_at_3, r.p_at_5);
}

int cmd_eval(const Options& o, std::ostream& out) {
  Ensemble e;
  if (o.grid) {
    if (o.train.empty()) throw UsageError("--grid needs --train");
    const Dataset train = load(o.train, o);
    HyperParams base = finalize(o.hyper);
    const GridResult g = grid_search(train, o.grid_spec, base, o.hyper.seed, o.valid_fraction);
    if (!o.grid_output.empty()) write_grid_table(g, o.grid_output);
    const HyperParams& b = g.best;
    out << fmt("best n_bar=%zu lambda=%g mu=%g k_nn=%zu\n", b.n_bar, b.admm.lambda, b.admm.mu, b.k_nn);
    TrainStats stats;
    e = train_ensemble(train.features, train.labels, b, o.hyper.seed, &stats);
    if (o.verbose) print_stats(stats, out);
    if (!o.model.empty()) save_model(e, std::filesystem::path(o.model));
    e.hyper.threads = o.threads;
  } else {
    e = load_for_predict(o);
  }
  const Dataset test = load(o.data, o);
  if (test.feature_dim() > e.feature_dim || test.label_count() > e.label_count)
    throw UsageError("test data dimensions exceed the model's");
  const auto ks = usable_ks(o.ks, e.label_count);
  const EvalReport report = evaluate(e, test.features, test.labels, ks);
  print_report(report, out);
  if (o.verbose) out << fmt("predict %.3fs\n", report.predict_seconds);
  auto f = open_out(o.output);
  write_report_csv(report, f);
  return kExitOk;
}

int cmd_diag(const Options& o, std::ostream& out) {
  const Dataset data = load(o.data, o);
  HyperParams h = finalize(o.hyper);
  const OmegaSet omega = build_omega(data.labels, h.n_bar);
  const std::size_t cap = std::min(data.num_points(), data.label_count());
  auto f = open_out(o.output);
  f << "l_hat,global_svd_error,nn_objective_error\n";
  for (std::size_t l : o.l_hats) {
    if (l < 1 || l > cap) throw UsageError("--l-hats values must lie in [1, min(n, L)]");
    SvpConfig svp = h.svp;
    svp.l_hat = l;
    const double global = approximation_error(data.labels, l, ApproxMode::global_svd, nullptr, svp);
    const double local = approximation_error(data.labels, l, ApproxMode::nn_objective, &omega, svp);
    const std::string row = fmt("%zu,%.8f,%.8f\n", l, global, local);
    f << row;
    out << row;
  }
  auto hist = open_out(o.histogram);
  hist << "label,count\n";
  const auto freq = label_frequencies(data.labels);
  for (std::size_t l = 0; l < freq.size(); ++l) hist << l << ',' << freq[l] << '\n';
  return kExitOk;
}

int cmd_split(const Options& o, std::ostream& out) {
  const Dataset data = load(o.data, o);
  const std::size_t n = data.num_points();
  SplitIndices split;
  if (!o.indices.empty()) {
    const auto cols = read_index_columns(o.indices, n);
    if (o.column >= cols.size()) throw UsageError("--column out of range for " + o.indices);
    split.train = cols[o.column];
    if (!o.test_indices.empty()) {
      const auto test_cols = read_index_columns(o.test_indices, n);
      if (o.column >= test_cols.size()) throw UsageError("--column out of range for " + o.test_indices);
      split.test = test_cols[o.column];
    } else {
      std::vector<char> in_train(n, 0);
      for (Index i : split.train) in_train[static_cast<std::size_t>(i)] = 1;
      for (std::size_t i = 0; i < n; ++i)
        if (!in_train[i]) split.test.push_back(static_cast<Index>(i));
    }
  } else {
    std::size_t train_size = o.train_size;
    if (train_size == 0) {
      if (!(o.train_fraction > 0.0 && o.train_fraction < 1.0)) throw UsageError("--train-fraction must be in (0, 1)");
      train_size = static_cast<std::size_t>(o.train_fraction * static_cast<double>(n) + 0.5);
    }
    if (train_size > n) throw UsageError("--train-size exceeds the point count");
    split = random_split(n, train_size, o.hyper.seed);
  }
  write_xmc(data.subset(split.train), std::filesystem::path(o.train_out));
  write_xmc(data.subset(split.test), std::filesystem::path(o.test_out));
  out << fmt("train %zu points -> %s\ntest %zu points -> %s\n", split.train.size(), o.train_out.c_str(),
             split.test.size(), o.test_out.c_str());
  return kExitOk;
}

// Config keys without a [section] belong to the subcommand being run.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  std::string section;

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    auto items = CLI::ConfigINI::from_config(in);
    for (auto& item : items) {
      if (item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == "default")) item.parents = {section};
    }
    return items;
  }
};

struct Cli {
  CLI::App app{"Local label-embedding extreme multi-label classifier", "localembed"};
  Options o;
  CLI::App* train = nullptr;
  CLI::App* predict = nullptr;
  CLI::App* eval = nullptr;
  CLI::App* diag = nullptr;
  CLI::App* split = nullptr;
  std::shared_ptr<SubcommandConfig> config = std::make_shared<SubcommandConfig>();

  Cli() {
    app.set_help_flag("--help", "Show help and exit");
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "Read key=value options (long flag names without dashes); command-line flags win");
    app.config_formatter(config);
    app.allow_config_extras(CLI::config_extras_mode::error);

    train = app.add_subcommand("train", "Train an ensemble and write a model file");
    add_common(train, o);
    train->add_option("--data", o.data, "Training data file")->required();
    train->add_option("--model", o.model, "Output model path")->required();
    add_hyper(train, o.hyper);

    predict = app.add_subcommand("predict", "Write top-p labels with scores for each point");
    add_common(predict, o);
    predict->add_option("--model", o.model, "Model file")->required();
    predict->add_option("--data", o.data, "Data file to predict")->required();
    predict->add_option("--top", o.top, "Labels per point")->check(CLI::PositiveNumber)->capture_default_str();
    predict->add_option("--output", o.output, "Prediction file (default stdout)");
    predict->add_option("--k-nn", o.k_nn_override, "Override the model's neighbor count")->check(CLI::PositiveNumber);
    predict->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();

    o.output = "eval.csv";
    eval = app.add_subcommand("eval", "Report precision@k on a test set");
    add_common(eval, o);
    eval->add_option("--model", o.model, "Model file (with --grid: optional output path for the tuned model)");
    eval->add_option("--output", o.output, "CSV report path")->capture_default_str();
    eval->add_option("--data", o.data, "Test data file")->required();
    eval->add_option("--ks", o.ks, "Comma-separated k values")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_flag("--grid", o.grid, "Tune on a validation split of --train, retrain on all of it, then evaluate");
    eval->add_option("--train", o.train, "Training data file for --grid");
    eval->add_option("--valid-fraction", o.valid_fraction, "Fraction of --train held out for --grid")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    eval->add_option("--grid-lambda", o.grid_spec.lambda, "Grid values for --lambda")
        ->delimiter(',')
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    eval->add_option("--grid-mu", o.grid_spec.mu, "Grid values for --mu")
        ->delimiter(',')
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    eval->add_option("--grid-k-nn", o.grid_spec.k_nn, "Grid values for --k-nn")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--grid-n-bar", o.grid_spec.n_bar, "Grid values for --n-bar")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    eval->add_option("--grid-output", o.grid_output, "CSV of validation precision for every grid point");
    add_hyper(eval, o.hyper);

    diag = app.add_subcommand("diag", "Label-matrix approximation errors and label frequency histogram");
    add_common(diag, o);
    diag->add_option("--data", o.data, "Data file")->required();
    diag->add_option("--l-hats", o.l_hats, "Comma-separated embedding dimensions to sweep")
        ->delimiter(',')
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag->add_option("--output", o.output, "Approximation error CSV path")->capture_default_str();
    diag->add_option("--histogram", o.histogram, "Label frequency CSV path")->capture_default_str();
    diag->add_option("--n-bar", o.hyper.h.n_bar, "Neighbors per point in the local objective")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag->add_option("--svp-iters", o.hyper.h.svp.max_iters, "SVP iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    diag->add_option("--svp-tol", o.hyper.h.svp.rel_tol, "SVP relative objective change tolerance")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    split = app.add_subcommand("split", "Write a train/test split of a data file");
    add_common(split, o);
    split->add_option("--data", o.data, "Data file to split")->required();
    split->add_option("--train-out", o.train_out, "Training split output path")->required();
    split->add_option("--test-out", o.test_out, "Test split output path")->required();
    split->add_option("--seed", o.hyper.seed, "Random split seed")->capture_default_str();
    split->add_option("--train-size", o.train_size, "Training points (overrides --train-fraction)")
        ->check(CLI::PositiveNumber);
    split->add_option("--train-fraction", o.train_fraction, "Fraction of points used for training")
        ->capture_default_str();
    split->add_option("--indices", o.indices, "File of one-based training row ids, one column per split");
    split->add_option("--test-indices", o.test_indices, "File of one-based test row ids (default: complement)");
    split->add_option("--column", o.column, "Zero-based column of the index files to use")->capture_default_str();
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto cli = std::make_unique<Cli>();
  for (int i = 1; i < argc; ++i) {
    if (argv[i][0] != '-') {
      cli->config->section = argv[i];
      break;
    }
  }
  try {
    cli->app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    cli->app.exit(e, out, err);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  Options& o = cli->o;
  try {
    if (cli->train->parsed()) return cmd_train(o, out);
    if (cli->predict->parsed()) {
      if (cli->predict->count("--output") == 0) o.output.clear();
      return cmd_predict(o, out);
    }
    if (cli->eval->parsed()) {
      // --k-nn and --threads also apply to a loaded model
      if (cli->eval->count("--k-nn") > 0) o.k_nn_override = o.hyper.h.k_nn;
      o.threads = o.hyper.h.threads;
      return cmd_eval(o, out);
    }
    if (cli->diag->parsed()) {
      if (cli->diag->count("--output") == 0) o.output = "diag.csv";
      return cmd_diag(o, out);
    }
    if (cli->split->parsed()) return cmd_split(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"localembed"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::vector<std::string> undocumented_flags() {
  Cli cli;
  std::vector<std::string> missing;
  auto check = [&](const CLI::App* app, const std::string& name) {
    for (const CLI::Option* opt : app->get_options()) {
      if (opt->get_description().empty()) missing.push_back(name + " " + opt->get_name());
    }
    const std::string help = app->help();
    for (const CLI::Option* opt : app->get_options()) {
      for (const auto& lname : opt->get_lnames()) {
        if (help.find("--" + lname) == std::string::npos) missing.push_back(name + " --" + lname + " (not in help)");
      }
    }
  };
  check(&cli.app, "localembed");
  for (const CLI::App* sub : cli.app.get_subcommands({})) check(sub, sub->get_name());
  return missing;
}

}  // namespace localembed
