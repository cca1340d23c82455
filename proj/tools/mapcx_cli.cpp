// mapcx: command line front end.
//
//   mapcx synth    --out-dir DIR [--marginal-shift M --posterior-shift P ...]
//   mapcx prior    --source S.csv --out-dir DIR [--k 100 --theta-min 2 --theta-max 50]
//   mapcx adapt    --prior prior.json --target T.csv --budget 100 --initial 10 --out-dir DIR
//   mapcx sweep    --source S.csv --target T.csv --budgets 50,100,500 --out-dir DIR
//   mapcx baseline --source S.csv --target T.csv --theta 25 --out-dir DIR

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mapcx/mapcx.hpp"

namespace fs = std::filesystem;
using namespace mapcx;

namespace {

struct CommonOptions {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string label_column = "label";
  unsigned threads = 0;
};

struct NetOptions {
  std::size_t epochs = NetConfig{}.epochs;
  double learning_rate = NetConfig{}.learning_rate;
  std::size_t batch_size = NetConfig{}.batch_size;

  NetConfig config(std::uint64_t seed) const {
    NetConfig c;
    c.epochs = epochs;
    c.learning_rate = learning_rate;
    c.batch_size = batch_size;
    c.seed = seed;
    return c;
  }
};

struct PriorOptions {
  std::size_t k = 100;
  std::size_t theta_min = 2;
  std::size_t theta_max = 50;
  double sample_fraction = 0.8;
  double validation_fraction = 0.3;
};

struct ExperimentOptions {
  std::string source, target, prior_path;
  std::vector<std::size_t> budgets{100};
  std::size_t initial = 10;
  std::size_t batch_per_query = 1;
  std::size_t repetitions = 10;
  double alpha = 1.0;
  double delta = 0.05;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--out-dir", o.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--label-column", o.label_column, "Label column name")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = all cores)")->capture_default_str();
}

void add_net(CLI::App* cmd, NetOptions& o) {
  cmd->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--learning-rate", o.learning_rate, "SGD step size")->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "Mini-batch size")->capture_default_str();
}

void add_prior(CLI::App* cmd, PriorOptions& o) {
  cmd->add_option("--k", o.k, "Bootstrap samples")->capture_default_str();
  cmd->add_option("--theta-min", o.theta_min, "Smallest hidden width")->capture_default_str();
  cmd->add_option("--theta-max", o.theta_max, "Largest hidden width")->capture_default_str();
  cmd->add_option("--sample-fraction", o.sample_fraction, "Bootstrap sample fraction")
      ->capture_default_str();
  cmd->add_option("--validation-fraction", o.validation_fraction, "Held-out fraction per sample")
      ->capture_default_str();
}

void add_capacity(CLI::App* cmd, ExperimentOptions& o) {
  cmd->add_option("--alpha", o.alpha, "Scale of the capacity rate")->capture_default_str();
  cmd->add_option("--delta", o.delta, "Confidence parameter")->capture_default_str();
}

PriorConfig prior_config(const PriorOptions& p, const NetOptions& n, const CommonOptions& c) {
  if (p.theta_min < 1 || p.theta_max <= p.theta_min)
    throw Error("need 1 <= --theta-min < --theta-max");
  PriorConfig cfg;
  cfg.k = p.k;
  cfg.theta_grid = theta_range(p.theta_min, p.theta_max);
  cfg.sample_fraction = p.sample_fraction;
  cfg.validation_fraction = p.validation_fraction;
  cfg.net_template = n.config(derive_seed(c.seed, Stream::prior, {0xc11ULL}));
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  return cfg;
}

fs::path out_path(const CommonOptions& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return fs::path(c.out_dir) / name;
}

int cmd_synth(const ShiftSpec& spec, const CommonOptions& c) {
  auto [source, target] = make_shifted_pair(spec);
  const auto source_path = out_path(c, "source.csv");
  const auto target_path = out_path(c, "target.csv");
  write_csv(source_path.string(), source, c.label_column);
  write_csv(target_path.string(), reveal_all(target), c.label_column);
  std::cout << "wrote " << source_path.string() << " (" << source.rows() << " rows) and "
            << target_path.string() << " (" << target.rows() << " rows)\n";
  return 0;
}

int cmd_prior(const std::string& source_path, const PriorOptions& p, const NetOptions& n,
              const CommonOptions& c) {
  const LabeledTable source = load_csv(source_path, c.label_column);
  const std::uint64_t before = models_trained();
  const ComplexityPrior prior = estimate_prior(source, prior_config(p, n, c));
  const auto path = out_path(c, "prior.json");
  save_prior(path.string(), prior);
  std::cout << "mu=" << prior.mu << " sigma=" << prior.sigma << " models_trained="
            << models_trained() - before << "\nwrote " << path.string() << '\n';
  return 0;
}

int cmd_adapt(const ExperimentOptions& e, const NetOptions& n, const CommonOptions& c) {
  if (e.budgets.size() != 1) throw Error("adapt takes a single --budget");
  const ComplexityPrior prior = load_prior(e.prior_path);
  const UnlabeledTable target = hide_labels(load_csv(e.target, c.label_column));
  const std::uint64_t before = models_trained();

  ActiveConfig ac;
  ac.initial_size = e.initial;
  ac.budget = e.budgets.front();
  ac.batch_per_query = e.batch_per_query;
  ac.net_config = n.config(derive_seed(c.seed, Stream::active, {0x9e7ULL}))
                      .with_hidden(prior.rounded_mean());
  ac.seed = c.seed;
  HiddenLabelOracle oracle(target);
  ActiveResult active = run_active_learning(target, oracle, ac);

  const LabeledTable labeled = active.pool.to_table(target);
  CapacityParams params{labeled.n_features(), labeled.class_count(), e.alpha, e.delta,
                        labeled.rows()};
  AdaptationResult result =
      run_map_adaptation(prior, labeled, params, n.config(derive_seed(c.seed, Stream::adapt)),
                         {prior.grid_lo, prior.grid_hi}, AdaptOptions{c.threads, {}});
  const std::uint64_t trained = models_trained() - before;

  write_query_log(out_path(c, "queries.csv").string(), active.pool);
  write_posterior_csv(out_path(c, "posterior.csv").string(), result.table);
  save_model(out_path(c, "model.json").string(), result.final_model);
  nlohmann::json summary = summary_json(result, params);
  summary["oracle_queries"] = oracle.query_count();
  summary["models_trained"] = trained;
  summary["budget"] = ac.budget;
  summary["initial_size"] = ac.initial_size;
  std::ofstream(out_path(c, "summary.json")) << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

ExperimentSpec experiment_spec(const ExperimentOptions& e, const PriorOptions& p,
                               const NetOptions& n, const CommonOptions& c) {
  ExperimentSpec spec;
  spec.source_path = e.source;
  spec.target_path = e.target;
  spec.label_column = c.label_column;
  spec.prior_config = prior_config(p, n, c);
  if (!e.prior_path.empty()) spec.prior = load_prior(e.prior_path);
  spec.initial_size = e.initial;
  spec.batch_per_query = e.batch_per_query;
  spec.net_template = n.config(c.seed);
  spec.alpha = e.alpha;
  spec.delta = e.delta;
  spec.budgets = e.budgets;
  std::sort(spec.budgets.begin(), spec.budgets.end());
  spec.repetitions = e.repetitions;
  spec.seed = c.seed;
  spec.threads = c.threads;
  return spec;
}

void write_reports(const RunReport& report, const CommonOptions& c, const std::string& stem) {
  write_report_json(out_path(c, stem + "_report.json").string(), report);
  write_curves_csv(out_path(c, stem + "_curves.csv").string(), report);
  write_runs_csv(out_path(c, stem + "_runs.csv").string(), report);
  std::cout << "budget,mean_accuracy,std_accuracy,mean_source_accuracy\n";
  for (const auto& a : report.aggregates)
    std::cout << a.budget << ',' << a.mean_accuracy << ',' << a.std_accuracy << ','
              << a.mean_source_accuracy << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transfer a hidden-width prior from a source task and select the width on a "
               "target task by MAP estimation with active learning"};
  app.require_subcommand(1);

  CommonOptions common;
  NetOptions net;
  PriorOptions prior_opts;
  ExperimentOptions exp;
  ShiftSpec shift;
  std::size_t fixed_theta = 25;
  std::string source_path;

  auto* synth = app.add_subcommand("synth", "Write a synthetic source/target CSV pair");
  add_common(synth, common);
  synth->add_option("--n-features", shift.n_features)->capture_default_str();
  synth->add_option("--classes", shift.class_count)->capture_default_str();
  synth->add_option("--source-size", shift.source_size)->capture_default_str();
  synth->add_option("--target-size", shift.target_size)->capture_default_str();
  synth->add_option("--marginal-shift", shift.marginal_shift)->capture_default_str();
  synth->add_option("--posterior-shift", shift.posterior_shift)->capture_default_str();
  synth->add_option("--noise", shift.noise)->capture_default_str();

  auto* prior = app.add_subcommand("prior", "Estimate the width prior on a source table");
  add_common(prior, common);
  add_net(prior, net);
  add_prior(prior, prior_opts);
  prior->add_option("--source", source_path, "Labeled source CSV")->required();

  auto* adapt = app.add_subcommand("adapt", "Active learning plus MAP width selection");
  add_common(adapt, common);
  add_net(adapt, net);
  add_capacity(adapt, exp);
  adapt->add_option("--prior", exp.prior_path, "Prior JSON from `prior`")->required();
  adapt->add_option("--target", exp.target, "Target CSV (labels act as the oracle)")->required();
  adapt->add_option("--budget", exp.budgets, "Query budget b")->expected(1)->capture_default_str();
  adapt->add_option("--initial", exp.initial, "Initial labeled sample r")->capture_default_str();
  adapt->add_option("--batch-per-query", exp.batch_per_query)->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "Budget sweep over repeated query/test splits");
  auto* baseline = app.add_subcommand("baseline", "Fixed-width active learning and source-direct");
  for (auto* cmd : {sweep, baseline}) {
    add_common(cmd, common);
    add_net(cmd, net);
    add_prior(cmd, prior_opts);
    cmd->add_option("--source", exp.source, "Labeled source CSV")->required();
    cmd->add_option("--target", exp.target, "Target CSV")->required();
    cmd->add_option("--budget,--budgets", exp.budgets, "Budgets (comma separated)")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--initial", exp.initial)->capture_default_str();
    cmd->add_option("--batch-per-query", exp.batch_per_query)->capture_default_str();
    cmd->add_option("--repetitions", exp.repetitions)->capture_default_str();
  }
  add_capacity(sweep, exp);
  sweep->add_option("--prior", exp.prior_path, "Reuse a persisted prior");
  baseline->add_option("--theta", fixed_theta, "Fixed hidden width")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      shift.seed = common.seed;
      return cmd_synth(shift, common);
    }
    if (prior->parsed()) return cmd_prior(source_path, prior_opts, net, common);
    if (adapt->parsed()) return cmd_adapt(exp, net, common);
    if (sweep->parsed()) {
      write_reports(run_experiment(experiment_spec(exp, prior_opts, net, common)), common, "sweep");
      return 0;
    }
    if (baseline->parsed()) {
      write_reports(run_baseline_fixed_theta(experiment_spec(exp, prior_opts, net, common),
                                             fixed_theta),
                    common, "baseline");
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
