#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "alsn/arch.hpp"
#include "alsn/data.hpp"
#include "alsn/genome.hpp"
#include "alsn/parameters.hpp"
#include "alsn/rng.hpp"

namespace alsn {

struct SearchConfig {
  int population = 24;
  int survivors = 8;
  int generations = 50;
  int fitness_iters = 200;
  int fitness_window = 50;  // fitness = mean of the last this-many losses
  double mutation_rate = 0.1;
  int accumulation = 10;
  AdamOptions adam{1e-3, 0.9, 0.999, 5e-4, 1e-8};
  std::uint64_t master_seed = 1;
  NetConfig net;
  int workers = 1;
  std::filesystem::path state_file;  // rewritten after every generation when set
  std::filesystem::path trace_file;  // generation,best_fitness,mean_fitness
  bool verbose = false;

  // Throws std::invalid_argument when the composition rules are violated:
  // population == 3 * survivors, survivors even and positive.
  void validate() const;
};

struct Lineage {
  int generation = 0;
  int index = 0;
  auto operator<=>(const Lineage&) const = default;
};

struct Individual {
  Genome genome;
  std::optional<double> fitness;  // lower is better; +inf when training diverged
  Lineage lineage;
};

// The best `survivors` individuals seen in any generation, ascending fitness.
struct HallOfFame {
  std::vector<Individual> members;
  double best() const;
};

struct GenerationStats {
  int generation = 0;
  double best_fitness = 0;
  double mean_fitness = 0;
};

struct SearchReport {
  Individual best;
  HallOfFame hall_of_fame;
  std::vector<GenerationStats> trace;
  int evaluations = 0;  // fitness evaluations run by this call
};

// First half random genomes, second half ASPP-seeded; lineage (0, i).
std::vector<Individual> init_population(const SearchConfig& cfg);

// Trains a fresh network for cfg.fitness_iters forwards (Adam step every
// cfg.accumulation forwards) and returns the mean of the last
// cfg.fitness_window losses. Weight init depends on (master_seed, lineage);
// the sample order depends on master_seed only.
double evaluate_fitness(const Individual& ind, const SearchConfig& cfg, const std::vector<Sample>& train_set);

// Merge, sort by (fitness, lineage), keep the first `survivors`.
HallOfFame select(const HallOfFame& hof, const std::vector<Individual>& evaluated, int survivors);

// Swaps one uniformly chosen gene segment; both children are repaired.
std::pair<Genome, Genome> crossover(const Genome& a, const Genome& b, Rng& rng);
// Every gene resampled uniformly from its range with probability `rate`,
// without repair.
Genome mutate_genes(const Genome& g, double rate, Rng& rng);
// mutate_genes followed by repair.
Genome mutate(const Genome& g, double rate, Rng& rng);

// Offspring of generation `generation` (>= 1): survivors/2 pairs give
// `survivors` crossover children, then `survivors` mutated copies. Lineage
// indices start at `survivors`.
std::vector<Individual> breed(const HallOfFame& hof, int generation, const SearchConfig& cfg);

// Evaluates every individual without a fitness, using cfg.workers threads.
// Results do not depend on the worker count.
int evaluate_population(std::vector<Individual>& pop, const SearchConfig& cfg, const std::vector<Sample>& train_set);

// The full loop. With `resume`, continues from cfg.state_file when it exists.
SearchReport run_search(const SearchConfig& cfg, const std::vector<Sample>& train_set, bool resume = false);

// ---- state file ----

struct SearchState {
  int generation = -1;  // last completed generation
  std::uint64_t master_seed = 0;
  HallOfFame hall_of_fame;
  std::vector<GenerationStats> trace;
};

std::string format_state(const SearchState& state);
SearchState parse_state(const std::string& text);
void write_state(const SearchState& state, const std::filesystem::path& path);
SearchState read_state(const std::filesystem::path& path);

std::string format_trace(const std::vector<GenerationStats>& trace);

// Genome text followed by "FITNESS <value>".
std::string format_individual(const Individual& ind);

}  // namespace alsn
