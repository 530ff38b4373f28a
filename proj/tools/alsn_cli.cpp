#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "alsn/arch.hpp"
#include "alsn/data.hpp"
#include "alsn/genome.hpp"
#include "alsn/metrics.hpp"
#include "alsn/rng.hpp"
#include "alsn/search.hpp"
#include "alsn/trainer.hpp"

namespace fs = std::filesystem;
using namespace alsn;

namespace {

constexpr std::uint64_t kRandomGenomeTag = 0x6e0e;

struct GenDataArgs {
  int count = 250;
  int size = 64;
  std::uint64_t seed = 1;
  std::string out;
  int min_shapes = 1;
  int max_shapes = 3;
  int noise = 10;
};

struct SearchArgs {
  std::string data;
  std::string out;
  int generations = 50;
  int population = 24;
  int iters = 200;
  int window = 50;
  int channels = 8;
  int nodes = 4;
  int stages = 5;
  double mutation_rate = 0.1;
  double lr = 1e-3;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
  int workers = 1;
  bool resume = false;
};

struct TrainArgs {
  std::string genome;
  std::string data;
  std::string out;
  int epochs = 25;
  int channels = 8;
  double lr = 1e-3;
  int lr_drop_after = 20;
  double val_fraction = 0.2;
  bool no_augment = false;
  std::uint64_t seed = 1;
  bool resume = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  int match_radius = 1;
  std::string csv;
  std::string split = "all";
  double val_fraction = 0.2;
};

struct GenomeArgs {
  std::string file;
  std::uint64_t seed = 1;
  int stages = 5;
  int nodes = 4;
  bool aspp = false;
};

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

// Resolved configuration, in the same "key value" form the config file uses.
void print_config(const CLI::App& sub) {
  std::cerr << "# " << sub.get_name() << '\n';
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->get_name() == "--config" || opt->get_lnames().empty()) continue;
    std::string value;
    const auto& res = opt->results();
    if (!res.empty()) {
      value = res.back();
    } else if (opt->get_expected_min() == 0) {
      value = "false";
    } else {
      value = opt->get_default_str();
    }
    std::cerr << opt->get_lnames().front() << ' ' << (value.empty() ? "-" : value) << '\n';
  }
}

std::vector<Sample> load_split(const std::string& dir, double val_fraction, bool want_val) {
  DatasetSplit split = split_dataset(read_dataset(dir), val_fraction);
  return want_val ? split.val : split.train;
}

int run_gen_data(const GenDataArgs& a) {
  SynthOptions opt;
  opt.min_shapes = a.min_shapes;
  opt.max_shapes = a.max_shapes;
  opt.noise_amplitude = a.noise;
  write_dataset(a.out, generate(a.seed, a.count, a.size, opt));
  std::cout << "wrote " << a.count << " samples to " << a.out << '\n';
  return 0;
}

int run_search_cmd(const SearchArgs& a) {
  SearchConfig cfg;
  cfg.population = a.population;
  cfg.survivors = a.population / 3;
  cfg.generations = a.generations;
  cfg.fitness_iters = a.iters;
  cfg.fitness_window = a.window;
  cfg.mutation_rate = a.mutation_rate;
  cfg.adam.lr = a.lr;
  cfg.master_seed = a.seed;
  cfg.net.stages = a.stages;
  cfg.net.nodes = a.nodes;
  cfg.net.channels = a.channels;
  cfg.workers = a.workers;
  cfg.verbose = true;
  const fs::path out(a.out);
  fs::create_directories(out);
  cfg.state_file = out / "search_state.txt";
  cfg.trace_file = out / "trace.csv";
  cfg.validate();

  const std::vector<Sample> train = load_split(a.data, a.val_fraction, false);
  if (train.empty()) throw std::runtime_error("no training samples in " + a.data);
  cfg.net.image_size = train.front().image.height;

  const SearchReport report = run_search(cfg, train, a.resume);
  write_file(out / "best.genome", encode_text(report.best.genome));
  std::string hof;
  for (const auto& ind : report.hall_of_fame.members) {
    hof += "LINEAGE " + std::to_string(ind.lineage.generation) + " " + std::to_string(ind.lineage.index) + "\n";
    hof += format_individual(ind);
  }
  write_file(out / "hall_of_fame.txt", hof);
  std::printf("best fitness %.6f (generation %d, index %d), %d evaluations\n", *report.best.fitness,
              report.best.lineage.generation, report.best.lineage.index, report.evaluations);
  std::printf("best genome written to %s\n", (out / "best.genome").string().c_str());
  return 0;
}

int run_train_cmd(const TrainArgs& a) {
  const Genome genome = decode_text(read_file(a.genome));
  DatasetSplit split = split_dataset(read_dataset(a.data), a.val_fraction);
  if (split.train.empty()) throw std::runtime_error("no training samples in " + a.data);

  NetConfig net;
  net.stages = genome.stages;
  net.nodes = genome.nodes;
  net.channels = a.channels;
  net.image_size = split.train.front().image.height;

  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.lr = a.lr;
  cfg.lr_drop_after = a.lr_drop_after;
  cfg.augment = !a.no_augment;
  cfg.seed = a.seed;
  cfg.out_dir = a.out;
  cfg.verbose = true;

  fs::path resume;
  if (a.resume && fs::exists(fs::path(a.out) / "last.ckpt")) resume = fs::path(a.out) / "last.ckpt";
  fs::create_directories(a.out);
  write_file(fs::path(a.out) / "model.genome", encode_text(validate_and_repair(genome).genome));
  const TrainResult r = train(genome, net, cfg, split.train, split.val, resume);
  std::printf("best validation F %.4f at epoch %d\n", r.model.best_val_f, r.model.best_epoch);
  return 0;
}

int run_eval_cmd(const EvalArgs& a) {
  ModelCheckpoint m = load_model(a.checkpoint);
  std::vector<Sample> data = read_dataset(a.data);
  if (a.split != "all") data = load_split(a.data, a.val_fraction, a.split == "val");
  if (data.empty()) throw std::runtime_error("no samples selected from " + a.data);
  const PrReport r = evaluate(*m.network, data, a.match_radius);
  if (!a.csv.empty()) write_pr_csv(r, a.csv);
  std::printf("samples %zu  best F %.4f at threshold %.2f\n", data.size(), r.best_f, r.best_threshold);
  return 0;
}

int run_genome_validate(const GenomeArgs& a) {
  const Genome g = decode_text(read_file(a.file));
  const RepairResult r = validate_and_repair(g);
  std::printf("%zu repairs\n", r.repairs.size());
  for (const auto& rep : r.repairs) std::printf("%s: %s\n", rep.rule.c_str(), rep.detail.c_str());
  return 0;
}

int run_genome_show(const GenomeArgs& a) {
  const Genome g = decode_text(read_file(a.file));
  NetConfig cfg;
  cfg.stages = g.stages;
  cfg.nodes = g.nodes;
  std::cout << encode_text(validate_and_repair(g).genome) << '\n' << describe_plan(build_plan(g, cfg));
  return 0;
}

int run_genome_random(const GenomeArgs& a) {
  Rng rng(derive_seed(a.seed, {kRandomGenomeTag}));
  std::cout << encode_text(a.aspp ? aspp_seed(rng, a.stages, a.nodes) : random_genome(rng, a.stages, a.nodes));
  return 0;
}

// Appends "--key value" for every config-file key not already given as a
// flag, and drops the --config option itself.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args, given;
  std::string config;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      if (i + 1 >= argc) throw std::invalid_argument("--config needs a file name");
      config = argv[++i];
      continue;
    }
    if (a.rfind("--config=", 0) == 0) {
      config = a.substr(9);
      continue;
    }
    if (a.rfind("--", 0) == 0) given.push_back(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
    args.push_back(a);
  }
  if (config.empty()) return args;

  std::istringstream in(read_file(config));
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, value, rest;
    if (!(ls >> key)) continue;
    std::getline(ls, rest);
    const auto b = rest.find_first_not_of(" \t"), e = rest.find_last_not_of(" \t\r");
    if (b == std::string::npos)
      throw std::invalid_argument(config + " line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    value = rest.substr(b, e - b + 1);
    if (std::find(given.begin(), given.end(), key) != given.end()) continue;
    if (value == "true") {
      args.push_back("--" + key);
    } else if (value != "false") {
      args.push_back("--" + key);
      args.push_back(value);
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive linear span network search and training"};
  app.require_subcommand(1);
  std::string config_path;

  GenDataArgs gd;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic skeleton dataset");
  gen->add_option("--config", config_path, "File of 'key value' lines; command-line flags win");
  gen->add_option("--count", gd.count, "Number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  gen->add_option("--size", gd.size, "Image side length")->capture_default_str()->check(CLI::Range(16, 4096));
  gen->add_option("--seed", gd.seed, "Generator seed")->capture_default_str();
  gen->add_option("--out", gd.out, "Output directory")->required();
  gen->add_option("--min-shapes", gd.min_shapes, "Fewest shapes per image")->capture_default_str();
  gen->add_option("--max-shapes", gd.max_shapes, "Most shapes per image")->capture_default_str();
  gen->add_option("--noise", gd.noise, "Uniform noise amplitude in grey levels")->capture_default_str();

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "Genetic architecture search");
  search->add_option("--config", config_path, "File of 'key value' lines; command-line flags win");
  search->add_option("--data", sa.data, "Dataset directory")->required();
  search->add_option("--out", sa.out, "Output directory")->required();
  search->add_option("--generations", sa.generations, "Breeding rounds after the initial population")
      ->capture_default_str()->check(CLI::NonNegativeNumber);
  search->add_option("--population", sa.population, "Population size (three times the survivors)")
      ->capture_default_str();
  search->add_option("--iters", sa.iters, "Training iterations per fitness evaluation")->capture_default_str();
  search->add_option("--window", sa.window, "Trailing losses averaged into the fitness")->capture_default_str();
  search->add_option("--channels", sa.channels, "LSU channel width")->capture_default_str()->check(CLI::PositiveNumber);
  search->add_option("--nodes", sa.nodes, "Intermediate nodes per LSU")->capture_default_str()->check(CLI::Range(0, 64));
  search->add_option("--stages", sa.stages, "Backbone stages")->capture_default_str()->check(CLI::Range(2, 16));
  search->add_option("--mutation-rate", sa.mutation_rate, "Per-gene mutation probability")->capture_default_str();
  search->add_option("--lr", sa.lr, "Adam learning rate during fitness training")->capture_default_str();
  search->add_option("--val-fraction", sa.val_fraction, "Held-out tail of the dataset, never searched on")
      ->capture_default_str()->check(CLI::Range(0.0, 0.9));
  search->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  search->add_option("--workers", sa.workers, "Parallel fitness evaluations")->capture_default_str()->check(
      CLI::PositiveNumber);
  search->add_flag("--resume", sa.resume, "Continue from the state file in --out");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train a genome from scratch");
  trn->add_option("--config", config_path, "File of 'key value' lines; command-line flags win");
  trn->add_option("--genome", ta.genome, "Genome text file")->required();
  trn->add_option("--data", ta.data, "Dataset directory")->required();
  trn->add_option("--out", ta.out, "Output directory for checkpoints and metrics.csv")->required();
  trn->add_option("--epochs", ta.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  trn->add_option("--channels", ta.channels, "LSU channel width")->capture_default_str()->check(CLI::PositiveNumber);
  trn->add_option("--lr", ta.lr, "Adam learning rate")->capture_default_str();
  trn->add_option("--lr-drop-after", ta.lr_drop_after, "Epochs after this one use lr / 10")->capture_default_str();
  trn->add_option("--val-fraction", ta.val_fraction, "Validation tail of the dataset")
      ->capture_default_str()->check(CLI::Range(0.0, 0.9));
  trn->add_flag("--no-augment", ta.no_augment, "Disable scale/rotation/flip augmentation");
  trn->add_option("--seed", ta.seed, "Training seed")->capture_default_str();
  trn->add_flag("--resume", ta.resume, "Continue from last.ckpt in --out");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  ev->add_option("--config", config_path, "File of 'key value' lines; command-line flags win");
  ev->add_option("--checkpoint", ea.checkpoint, "Model checkpoint")->required();
  ev->add_option("--data", ea.data, "Dataset directory")->required();
  ev->add_option("--match-radius", ea.match_radius, "Pixel tolerance for matching")->capture_default_str()->check(
      CLI::NonNegativeNumber);
  ev->add_option("--csv", ea.csv, "Write the PR curve here");
  ev->add_option("--split", ea.split, "Which samples to score")->capture_default_str()->check(
      CLI::IsMember({"all", "train", "val"}));
  ev->add_option("--val-fraction", ea.val_fraction, "Validation tail used by --split")->capture_default_str();

  GenomeArgs ga;
  auto* genome = app.add_subcommand("genome", "Inspect and create genomes");
  genome->require_subcommand(1);
  auto* gvalidate = genome->add_subcommand("validate", "Parse a genome and list the repairs it needs");
  gvalidate->add_option("file", ga.file, "Genome text file")->required();
  auto* gshow = genome->add_subcommand("show", "Print the repaired genome and its decoded plan");
  gshow->add_option("file", ga.file, "Genome text file")->required();
  auto* gsrn = genome->add_subcommand("srn", "Print the SRN-equivalent genome");
  auto* grandom = genome->add_subcommand("random", "Print a random genome");
  grandom->add_option("--seed", ga.seed, "Seed")->capture_default_str();
  grandom->add_option("--stages", ga.stages, "Backbone stages")->capture_default_str()->check(CLI::Range(2, 16));
  grandom->add_option("--nodes", ga.nodes, "Intermediate nodes per LSU")->capture_default_str()->check(
      CLI::Range(0, 64));
  grandom->add_flag("--aspp", ga.aspp, "Seed from the ASPP-like pattern instead (needs nodes >= 4)");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  std::reverse(args.begin(), args.end());

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* usage = &app;
    for (const CLI::App* sub : {gen, search, trn, ev, genome, gvalidate, gshow, gsrn, grandom})
      if (sub->parsed()) usage = sub;
    std::cerr << usage->help();
    return 1;
  }

  try {
    for (CLI::App* sub : {gen, search, trn, ev, gvalidate, gshow, gsrn, grandom}) {
      if (!sub->parsed()) continue;
      print_config(*sub);
      if (sub == gen) return run_gen_data(gd);
      if (sub == search) return run_search_cmd(sa);
      if (sub == trn) return run_train_cmd(ta);
      if (sub == ev) return run_eval_cmd(ea);
      if (sub == gvalidate) return run_genome_validate(ga);
      if (sub == gshow) return run_genome_show(ga);
      if (sub == gsrn) {
        std::cout << encode_text(srn_preset());
        return 0;
      }
      if (sub == grandom) return run_genome_random(ga);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
