#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "alsn/rng.hpp"

namespace alsn {

// Operator vocabulary shared by every LSU node.
//   index 0      skip (identity)
//   index 1..12  conv(k, d), k in {1,3,5} major, d in {1,2,4,8} minor:
//                1:(1,1) 2:(1,2) 3:(1,4) 4:(1,8) 5:(3,1) 6:(3,2) 7:(3,4)
//                8:(3,8) 9:(5,1) 10:(5,2) 11:(5,4) 12:(5,8)
inline constexpr int kVocabSize = 13;
inline constexpr int kSkipOp = 0;

struct OperatorSpec {
  int kernel = 0;    // 0 for skip
  int dilation = 0;  // 0 for skip
  bool is_skip() const { return kernel == 0; }
};

OperatorSpec operator_spec(int index);
int operator_index(int kernel, int dilation);
std::string operator_name(int index);

// Internals of one Linear Span Unit: node p (1-based) reads node edges[p-1]
// (which must be < p) and applies operator ops[p-1].
struct LsuGenes {
  std::vector<int> edges;
  std::vector<int> ops;
  bool operator==(const LsuGenes&) const = default;
};

// The chromosome matrix. Units are stored 0-based here (unit u is stage
// u+1); the text format and diagnostics use 1-based names U1..US.
struct Genome {
  int stages = 5;  // S
  int nodes = 4;   // P
  std::vector<int> sideouts;     // A1: unit u taps backbone stage u+1
  std::vector<int> supervision;  // A4: unit u carries a loss
  // A2: connections[u][j] == 1 means unit u receives from unit u+1+j. Only
  // targets at most two stages deeper exist, so the vector has
  // min(2, S-1-u) entries.
  std::vector<std::vector<int>> connections;
  std::vector<int> fuse_inputs;  // unit u feeds the fuse unit
  std::vector<LsuGenes> lsus;    // S+1 entries, the last is the fuse unit

  bool operator==(const Genome&) const = default;

  int fuse_index() const { return stages; }
  bool active(int unit) const { return sideouts[static_cast<std::size_t>(unit)] != 0; }
  static int connection_count(int stages, int unit);
};

// Creates a genome of the given size with every gene zero.
Genome empty_genome(int stages, int nodes);

// Throws std::invalid_argument naming the first gene that is out of range or
// a container with the wrong length.
void check_well_formed(const Genome& g);

// ---- individual genes (the unit of mutation) ----

enum class GeneArea { kSideout, kSupervision, kConnection, kFuseInput, kLsuEdge, kLsuOp };

struct GeneRef {
  GeneArea area;
  int unit;  // 0-based; S denotes the fuse unit for LSU genes
  int slot;  // bit index or node index (0-based)
  bool operator==(const GeneRef&) const = default;
};

// Every gene in a fixed canonical order: A1, A4, connections unit by unit,
// fuse inputs, then per unit (fuse last) the edge genes followed by the
// operator genes.
std::vector<GeneRef> enumerate_genes(const Genome& g);
int gene_range(const Genome& g, const GeneRef& ref);
int get_gene(const Genome& g, const GeneRef& ref);
void set_gene(Genome& g, const GeneRef& ref, int value);
std::string gene_name(const GeneRef& ref);

// ---- gene segments (the unit of crossover) ----

enum class SegmentKind { kSideouts, kSupervision, kConnections, kFuseInputs, kLsu };

struct SegmentRef {
  SegmentKind kind;
  int unit;  // for kConnections / kLsu
  bool operator==(const SegmentRef&) const = default;
};

// Non-empty segments in canonical order.
std::vector<SegmentRef> enumerate_segments(const Genome& g);
void swap_segment(Genome& a, Genome& b, const SegmentRef& seg);
std::string segment_name(const SegmentRef& seg);

// ---- repair ----

struct Repair {
  std::string rule;  // "r1".."r4"
  std::string detail;
};

struct RepairResult {
  Genome genome;
  std::vector<Repair> repairs;
};

// Semantic repairs on a well-formed genome, applied in this order:
//   r4  no active unit at all: the deepest side-output is switched on
//   r1  an inactive unit loses its short connections (both directions) and
//       its fuse input
//   r3  supervision bits on inactive units are cleared
//   r2  the fuse unit has no input: the deepest active unit is connected
RepairResult validate_and_repair(const Genome& g);

// ---- constructors ----

Genome random_genome(Rng& rng, int stages = 5, int nodes = 4);
// The parallel-dilation pattern: every node reads the input node with
// conv(3, d), d cycling through 1, 2, 4, 8.
LsuGenes aspp_pattern(int nodes);
// ASPP-patterned LSUs with exactly one LSU gene changed; other areas random.
Genome aspp_seed(Rng& rng, int stages = 5, int nodes = 4);
// Side-output residual layout: all five side-outputs supervised, each unit
// fed by the next deeper one, fuse over all units, skip-only LSUs.
Genome srn_preset(int nodes = 4);

// ---- text format ----

std::string encode_text(const Genome& g);
// Throws std::invalid_argument with "line L, column C: ..." diagnostics.
Genome decode_text(std::string_view text);

}  // namespace alsn
