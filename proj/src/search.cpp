#include "alsn/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "alsn/trainer.hpp"

namespace alsn {

namespace {

constexpr std::uint64_t kPopulationTag = 0x9091;
constexpr std::uint64_t kWeightsTag = 0x3e16;
constexpr std::uint64_t kOrderTag = 0x0dde;
constexpr std::uint64_t kBreedTag = 0xb7ee;

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& context) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument(context + ": bad number '" + s + "'");
  return v;
}

bool fitness_less(const Individual& a, const Individual& b) {
  const double fa = a.fitness.value_or(std::numeric_limits<double>::infinity());
  const double fb = b.fitness.value_or(std::numeric_limits<double>::infinity());
  if (fa != fb) return fa < fb;
  return a.lineage < b.lineage;
}

}  // namespace

void SearchConfig::validate() const {
  if (survivors <= 0 || survivors % 2 != 0)
    throw std::invalid_argument("survivor count must be positive and even, got " + std::to_string(survivors));
  if (population != 3 * survivors)
    throw std::invalid_argument("population (" + std::to_string(population) + ") must equal 3 x survivors (" +
                                std::to_string(survivors) + ")");
  if (generations < 0) throw std::invalid_argument("generations must be >= 0");
  if (fitness_iters < 1 || fitness_window < 1 || fitness_window > fitness_iters)
    throw std::invalid_argument("need 1 <= fitness window <= fitness iterations");
  if (accumulation < 1) throw std::invalid_argument("accumulation must be >= 1");
  if (mutation_rate < 0 || mutation_rate > 1) throw std::invalid_argument("mutation rate must be in [0, 1]");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

double HallOfFame::best() const {
  if (members.empty()) return std::numeric_limits<double>::infinity();
  return members.front().fitness.value_or(std::numeric_limits<double>::infinity());
}

std::vector<Individual> init_population(const SearchConfig& cfg) {
  std::vector<Individual> pop;
  const int half = cfg.population / 2;
  for (int i = 0; i < cfg.population; ++i) {
    Rng rng(derive_seed(cfg.master_seed, {kPopulationTag, static_cast<std::uint64_t>(i)}));
    Individual ind;
    ind.genome = i < half ? random_genome(rng, cfg.net.stages, cfg.net.nodes)
                          : aspp_seed(rng, cfg.net.stages, cfg.net.nodes);
    ind.lineage = {0, i};
    pop.push_back(std::move(ind));
  }
  return pop;
}

double evaluate_fitness(const Individual& ind, const SearchConfig& cfg, const std::vector<Sample>& train_set) {
  if (train_set.empty()) throw std::invalid_argument("evaluate_fitness: empty training set");
  const std::uint64_t init = derive_seed(cfg.master_seed, {kWeightsTag, static_cast<std::uint64_t>(ind.lineage.generation),
                                                           static_cast<std::uint64_t>(ind.lineage.index)});
  Network<float> net(build_plan(ind.genome, cfg.net), init);

  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle(derive_seed(cfg.master_seed, {kOrderTag}));
  shuffle.shuffle(order.begin(), order.end());

  double window_sum = 0;
  int pending = 0;
  for (int it = 0; it < cfg.fitness_iters; ++it) {
    const Sample& s = train_set[static_cast<std::size_t>(order[static_cast<std::size_t>(it) % order.size()])];
    const double loss = accumulate_sample(net, s);
    if (!std::isfinite(loss)) {
      std::fprintf(stderr, "individual (%d,%d): non-finite loss at iteration %d; fitness set to +inf\n",
                   ind.lineage.generation, ind.lineage.index, it);
      return std::numeric_limits<double>::infinity();
    }
    if (it >= cfg.fitness_iters - cfg.fitness_window) window_sum += loss;
    if (++pending == cfg.accumulation) {
      net.params().adam_step(cfg.adam);
      pending = 0;
    }
  }
  return window_sum / cfg.fitness_window;
}

HallOfFame select(const HallOfFame& hof, const std::vector<Individual>& evaluated, int survivors) {
  HallOfFame out;
  out.members = hof.members;
  for (const auto& ind : evaluated) {
    if (!ind.fitness) throw std::invalid_argument("select: individual without fitness");
    out.members.push_back(ind);
  }
  std::stable_sort(out.members.begin(), out.members.end(), fitness_less);
  if (static_cast<int>(out.members.size()) > survivors) out.members.resize(static_cast<std::size_t>(survivors));
  return out;
}

std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng) {
  if (a.stages != b.stages || a.nodes != b.nodes) throw std::invalid_argument("crossover: parents differ in S/P");
  Genome x = a, y = b;
  const auto segments = enumerate_segments(x);
  swap_segment(x, y, segments[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(segments.size())))]);
  return {validate_and_repair(x).genome, validate_and_repair(y).genome};
}

Genome mutate_genes(const Genome& g, double rate, Rng& rng) {
  Genome out = g;
  for (const GeneRef& ref : enumerate_genes(out)) {
    // One draw per gene keeps the stream layout independent of outcomes.
    const bool hit = rng.bernoulli(rate);
    const int value = rng.uniform_int(gene_range(out, ref));
    if (hit) set_gene(out, ref, value);
  }
  return out;
}

Genome mutate(const Genome& g, double rate, Rng& rng) { return validate_and_repair(mutate_genes(g, rate, rng)).genome; }

std::vector<Individual> breed(const HallOfFame& hof, int generation, const SearchConfig& cfg) {
  const auto& parents = hof.members;
  if (parents.size() != static_cast<std::size_t>(cfg.survivors))
    throw std::invalid_argument("breed: hall of fame holds " + std::to_string(parents.size()) + " individuals, expected " +
                                std::to_string(cfg.survivors));
  Rng rng(derive_seed(cfg.master_seed, {kBreedTag, static_cast<std::uint64_t>(generation)}));
  std::vector<int> order(parents.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.shuffle(order.begin(), order.end());

  std::vector<Individual> kids;
  int index = cfg.survivors;
  for (std::size_t p = 0; p + 1 < order.size(); p += 2) {
    auto [x, y] = crossover(parents[static_cast<std::size_t>(order[p])].genome,
                            parents[static_cast<std::size_t>(order[p + 1])].genome, rng);
    kids.push_back({std::move(x), std::nullopt, {generation, index++}});
    kids.push_back({std::move(y), std::nullopt, {generation, index++}});
  }
  for (const auto& parent : parents)
    kids.push_back({mutate(parent.genome, cfg.mutation_rate, rng), std::nullopt, {generation, index++}});
  return kids;
}

int evaluate_population(std::vector<Individual>& pop, const SearchConfig& cfg, const std::vector<Sample>& train_set) {
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < pop.size(); ++i)
    if (!pop[i].fitness) todo.push_back(i);
  std::vector<double> results(todo.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < todo.size(); k = next++) results[k] = evaluate_fitness(pop[todo[k]], cfg, train_set);
  };
  const int threads = std::min<int>(cfg.workers, static_cast<int>(todo.size()));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (std::size_t k = 0; k < todo.size(); ++k) pop[todo[k]].fitness = results[k];
  return static_cast<int>(todo.size());
}

namespace {

GenerationStats stats_for(int generation, const HallOfFame& hof, const std::vector<Individual>& pop) {
  GenerationStats s;
  s.generation = generation;
  s.best_fitness = hof.best();
  double sum = 0;
  int n = 0;
  for (const auto& ind : pop) {
    if (!ind.fitness || !std::isfinite(*ind.fitness)) continue;
    sum += *ind.fitness;
    ++n;
  }
  s.mean_fitness = n ? sum / n : std::numeric_limits<double>::infinity();
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

SearchReport run_search(const SearchConfig& cfg, const std::vector<Sample>& train_set, bool resume) {
  cfg.validate();
  SearchReport report;
  HallOfFame hof;
  int start = 0;

  if (resume && !cfg.state_file.empty() && std::filesystem::exists(cfg.state_file)) {
    SearchState st = read_state(cfg.state_file);
    if (st.master_seed != cfg.master_seed)
      throw std::runtime_error("state file " + cfg.state_file.string() + " was written with seed " +
                               std::to_string(st.master_seed) + ", not " + std::to_string(cfg.master_seed));
    hof = std::move(st.hall_of_fame);
    report.trace = std::move(st.trace);
    start = st.generation + 1;
    if (cfg.verbose) std::fprintf(stderr, "resuming after generation %d\n", st.generation);
  }

  for (int gen = start; gen <= cfg.generations; ++gen) {
    std::vector<Individual> pop;
    if (gen == 0) {
      pop = init_population(cfg);
    } else {
      pop = hof.members;
      auto kids = breed(hof, gen, cfg);
      pop.insert(pop.end(), std::make_move_iterator(kids.begin()), std::make_move_iterator(kids.end()));
    }
    if (static_cast<int>(pop.size()) != cfg.population)
      throw std::logic_error("population size drifted to " + std::to_string(pop.size()));
    report.evaluations += evaluate_population(pop, cfg, train_set);

    std::vector<Individual> fresh;
    for (const auto& ind : pop)
      if (ind.lineage.generation == gen) fresh.push_back(ind);
    hof = select(hof, fresh, cfg.survivors);
    report.trace.push_back(stats_for(gen, hof, pop));

    if (cfg.verbose)
      std::fprintf(stderr, "generation %d: best %.6f mean %.6f\n", gen, report.trace.back().best_fitness,
                   report.trace.back().mean_fitness);
    if (!cfg.state_file.empty()) write_state({gen, cfg.master_seed, hof, report.trace}, cfg.state_file);
    if (!cfg.trace_file.empty()) write_text(cfg.trace_file, format_trace(report.trace));
  }

  report.hall_of_fame = hof;
  if (!hof.members.empty()) report.best = hof.members.front();
  if (!cfg.trace_file.empty()) write_text(cfg.trace_file, format_trace(report.trace));
  return report;
}

// ---- state file ----

std::string format_individual(const Individual& ind) {
  std::string out = encode_text(ind.genome);
  out += "FITNESS " + format_double(ind.fitness.value_or(std::numeric_limits<double>::infinity())) + "\n";
  return out;
}

std::string format_trace(const std::vector<GenerationStats>& trace) {
  std::string out = "generation,best_fitness,mean_fitness\n";
  char line[160];
  for (const auto& s : trace) {
    std::snprintf(line, sizeof line, "%d,%.9g,%.9g\n", s.generation, s.best_fitness, s.mean_fitness);
    out += line;
  }
  return out;
}

std::string format_state(const SearchState& state) {
  std::ostringstream os;
  os << "ALSN-SEARCH v1\n";
  os << "SEED " << state.master_seed << '\n';
  os << "GENERATION " << state.generation << '\n';
  os << "HOF " << state.hall_of_fame.members.size() << '\n';
  for (const auto& ind : state.hall_of_fame.members) {
    os << "LINEAGE " << ind.lineage.generation << ' ' << ind.lineage.index << '\n';
    os << format_individual(ind);
  }
  os << "TRACE " << state.trace.size() << '\n';
  for (const auto& s : state.trace)
    os << s.generation << ' ' << format_double(s.best_fitness) << ' ' << format_double(s.mean_fitness) << '\n';
  return os.str();
}

SearchState parse_state(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
  }
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw std::invalid_argument("search state line " + std::to_string(i + 1) + ": " + msg);
  };
  auto take = [&](const std::string& key) {
    if (i >= lines.size()) fail("unexpected end, expected " + key);
    std::istringstream is(lines[i]);
    std::string k;
    is >> k;
    if (k != key) fail("expected " + key + ", found '" + lines[i] + "'");
    std::string rest;
    std::getline(is, rest);
    ++i;
    const auto start = rest.find_first_not_of(' ');
    return start == std::string::npos ? std::string() : rest.substr(start);
  };

  SearchState st;
  if (i >= lines.size() || lines[i] != "ALSN-SEARCH v1") fail("missing ALSN-SEARCH v1 header");
  ++i;
  st.master_seed = std::stoull(take("SEED"));
  st.generation = std::stoi(take("GENERATION"));
  const int count = std::stoi(take("HOF"));
  for (int k = 0; k < count; ++k) {
    Individual ind;
    std::istringstream lin(take("LINEAGE"));
    lin >> ind.lineage.generation >> ind.lineage.index;
    std::string genome_text;
    while (i < lines.size() && lines[i].rfind("FITNESS", 0) != 0) genome_text += lines[i++] + "\n";
    ind.genome = decode_text(genome_text);
    ind.fitness = parse_double(take("FITNESS"), "FITNESS");
    st.hall_of_fame.members.push_back(std::move(ind));
  }
  const int trace = std::stoi(take("TRACE"));
  for (int k = 0; k < trace; ++k, ++i) {
    if (i >= lines.size()) fail("trace truncated");
    std::istringstream is(lines[i]);
    GenerationStats s;
    std::string best, mean;
    is >> s.generation >> best >> mean;
    s.best_fitness = parse_double(best, "trace");
    s.mean_fitness = parse_double(mean, "trace");
    st.trace.push_back(s);
  }
  return st;
}

void write_state(const SearchState& state, const std::filesystem::path& path) { write_text(path, format_state(state)); }

SearchState read_state(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open search state " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_state(text);
}

}  // namespace alsn
