#include "alsn/genome.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace alsn {

namespace {

constexpr int kKernels[3] = {1, 3, 5};
constexpr int kDilations[4] = {1, 2, 4, 8};

std::string unit_label(const Genome& g, int unit) {
  return unit == g.fuse_index() ? std::string("F") : "U" + std::to_string(unit + 1);
}

std::string unit_label(int unit) { return "U" + std::to_string(unit + 1); }

}  // namespace

OperatorSpec operator_spec(int index) {
  if (index < 0 || index >= kVocabSize)
    throw std::out_of_range("operator index " + std::to_string(index) + " outside vocabulary [0, 12]");
  if (index == kSkipOp) return {};
  const int i = index - 1;
  return {kKernels[i / 4], kDilations[i % 4]};
}

int operator_index(int kernel, int dilation) {
  for (int ki = 0; ki < 3; ++ki)
    for (int di = 0; di < 4; ++di)
      if (kKernels[ki] == kernel && kDilations[di] == dilation) return 1 + ki * 4 + di;
  throw std::invalid_argument("no operator conv(" + std::to_string(kernel) + ", " + std::to_string(dilation) + ")");
}

std::string operator_name(int index) {
  const OperatorSpec op = operator_spec(index);
  if (op.is_skip()) return "skip";
  return "conv" + std::to_string(op.kernel) + "x" + std::to_string(op.kernel) + "_d" + std::to_string(op.dilation);
}

int Genome::connection_count(int stages, int unit) { return std::clamp(stages - 1 - unit, 0, 2); }

Genome empty_genome(int stages, int nodes) {
  if (stages < 2) throw std::invalid_argument("genome needs at least 2 stages, got " + std::to_string(stages));
  if (nodes < 0) throw std::invalid_argument("LSU node count must be non-negative");
  Genome g;
  g.stages = stages;
  g.nodes = nodes;
  g.sideouts.assign(stages, 0);
  g.supervision.assign(stages, 0);
  g.fuse_inputs.assign(stages, 0);
  for (int u = 0; u < stages; ++u) g.connections.emplace_back(Genome::connection_count(stages, u), 0);
  g.lsus.assign(stages + 1, LsuGenes{std::vector<int>(nodes, 0), std::vector<int>(nodes, 0)});
  return g;
}

void check_well_formed(const Genome& g) {
  auto fail = [](const std::string& m) { throw std::invalid_argument(m); };
  if (g.stages < 2) fail("S must be >= 2, got " + std::to_string(g.stages));
  if (g.nodes < 0) fail("P must be >= 0, got " + std::to_string(g.nodes));
  const auto S = static_cast<std::size_t>(g.stages);
  if (g.sideouts.size() != S || g.supervision.size() != S || g.fuse_inputs.size() != S || g.connections.size() != S ||
      g.lsus.size() != S + 1)
    fail("genome areas do not match S=" + std::to_string(g.stages));
  for (const GeneRef& ref : enumerate_genes(g)) {
    const int v = get_gene(g, ref);
    const int range = gene_range(g, ref);
    if (v < 0 || v >= range)
      fail("gene " + gene_name(ref) + " = " + std::to_string(v) + " outside [0, " + std::to_string(range - 1) + "]");
  }
  for (int u = 0; u < g.stages; ++u)
    if (static_cast<int>(g.connections[u].size()) != Genome::connection_count(g.stages, u))
      fail(unit_label(u) + " has " + std::to_string(g.connections[u].size()) + " connection bits, expected " +
           std::to_string(Genome::connection_count(g.stages, u)));
  for (std::size_t u = 0; u < g.lsus.size(); ++u)
    if (static_cast<int>(g.lsus[u].edges.size()) != g.nodes || static_cast<int>(g.lsus[u].ops.size()) != g.nodes)
      fail(unit_label(g, static_cast<int>(u)) + " LSU does not have P=" + std::to_string(g.nodes) + " nodes");
}

std::vector<GeneRef> enumerate_genes(const Genome& g) {
  std::vector<GeneRef> out;
  for (int i = 0; i < g.stages; ++i) out.push_back({GeneArea::kSideout, i, i});
  for (int i = 0; i < g.stages; ++i) out.push_back({GeneArea::kSupervision, i, i});
  for (int u = 0; u < g.stages; ++u)
    for (int j = 0; j < Genome::connection_count(g.stages, u); ++j) out.push_back({GeneArea::kConnection, u, j});
  for (int i = 0; i < g.stages; ++i) out.push_back({GeneArea::kFuseInput, i, i});
  for (int u = 0; u <= g.stages; ++u) {
    for (int p = 0; p < g.nodes; ++p) out.push_back({GeneArea::kLsuEdge, u, p});
    for (int p = 0; p < g.nodes; ++p) out.push_back({GeneArea::kLsuOp, u, p});
  }
  return out;
}

int gene_range(const Genome&, const GeneRef& ref) {
  switch (ref.area) {
    case GeneArea::kLsuEdge:
      return ref.slot + 1;  // node p = slot+1 reads one of nodes 0..p-1
    case GeneArea::kLsuOp:
      return kVocabSize;
    default:
      return 2;
  }
}

namespace {

template <typename G>
auto& gene_slot(G& g, const GeneRef& ref) {
  const auto u = static_cast<std::size_t>(ref.unit);
  const auto s = static_cast<std::size_t>(ref.slot);
  switch (ref.area) {
    case GeneArea::kSideout:
      return g.sideouts.at(s);
    case GeneArea::kSupervision:
      return g.supervision.at(s);
    case GeneArea::kConnection:
      return g.connections.at(u).at(s);
    case GeneArea::kFuseInput:
      return g.fuse_inputs.at(s);
    case GeneArea::kLsuEdge:
      return g.lsus.at(u).edges.at(s);
    case GeneArea::kLsuOp:
      return g.lsus.at(u).ops.at(s);
  }
  throw std::logic_error("unknown gene area");
}

}  // namespace

int get_gene(const Genome& g, const GeneRef& ref) { return gene_slot(g, ref); }

void set_gene(Genome& g, const GeneRef& ref, int value) { gene_slot(g, ref) = value; }

std::string gene_name(const GeneRef& ref) {
  const std::string unit = ref.unit == -1 ? "" : std::to_string(ref.unit + 1);
  switch (ref.area) {
    case GeneArea::kSideout:
      return "A1[" + std::to_string(ref.slot + 1) + "]";
    case GeneArea::kSupervision:
      return "A4[" + std::to_string(ref.slot + 1) + "]";
    case GeneArea::kConnection:
      return "U" + unit + " conn<-U" + std::to_string(ref.unit + 2 + ref.slot);
    case GeneArea::kFuseInput:
      return "F in[" + std::to_string(ref.slot + 1) + "]";
    case GeneArea::kLsuEdge:
      return "unit " + unit + " e_" + std::to_string(ref.slot + 1);
    case GeneArea::kLsuOp:
      return "unit " + unit + " o_" + std::to_string(ref.slot + 1);
  }
  return "?";
}

std::vector<SegmentRef> enumerate_segments(const Genome& g) {
  std::vector<SegmentRef> out = {{SegmentKind::kSideouts, -1}, {SegmentKind::kSupervision, -1}};
  for (int u = 0; u < g.stages; ++u)
    if (Genome::connection_count(g.stages, u) > 0) out.push_back({SegmentKind::kConnections, u});
  out.push_back({SegmentKind::kFuseInputs, -1});
  if (g.nodes > 0)
    for (int u = 0; u <= g.stages; ++u) out.push_back({SegmentKind::kLsu, u});
  return out;
}

void swap_segment(Genome& a, Genome& b, const SegmentRef& seg) {
  if (a.stages != b.stages || a.nodes != b.nodes)
    throw std::invalid_argument("cannot exchange segments between genomes of different S/P");
  const auto u = static_cast<std::size_t>(seg.unit);
  switch (seg.kind) {
    case SegmentKind::kSideouts:
      std::swap(a.sideouts, b.sideouts);
      break;
    case SegmentKind::kSupervision:
      std::swap(a.supervision, b.supervision);
      break;
    case SegmentKind::kConnections:
      std::swap(a.connections.at(u), b.connections.at(u));
      break;
    case SegmentKind::kFuseInputs:
      std::swap(a.fuse_inputs, b.fuse_inputs);
      break;
    case SegmentKind::kLsu:
      std::swap(a.lsus.at(u), b.lsus.at(u));
      break;
  }
}

std::string segment_name(const SegmentRef& seg) {
  switch (seg.kind) {
    case SegmentKind::kSideouts:
      return "A1";
    case SegmentKind::kSupervision:
      return "A4";
    case SegmentKind::kConnections:
      return unit_label(seg.unit) + " conn";
    case SegmentKind::kFuseInputs:
      return "F in";
    case SegmentKind::kLsu:
      return "unit " + std::to_string(seg.unit + 1) + " lsu";
  }
  return "?";
}

RepairResult validate_and_repair(const Genome& input) {
  check_well_formed(input);
  RepairResult r{input, {}};
  Genome& g = r.genome;
  const int S = g.stages;

  if (std::none_of(g.sideouts.begin(), g.sideouts.end(), [](int b) { return b != 0; })) {
    g.sideouts[S - 1] = 1;
    r.repairs.push_back({"r4", "no active unit; enabled side-output " + unit_label(S - 1)});
  }

  for (int u = 0; u < S; ++u) {
    if (g.active(u)) continue;
    for (std::size_t j = 0; j < g.connections[u].size(); ++j) {
      if (!g.connections[u][j]) continue;
      g.connections[u][j] = 0;
      r.repairs.push_back({"r1", "dropped " + unit_label(u) + "<-" + unit_label(u + 1 + static_cast<int>(j)) +
                                     " (" + unit_label(u) + " inactive)"});
    }
    for (int src = std::max(0, u - 2); src < u; ++src) {
      const int j = u - src - 1;
      if (!g.connections[src][j]) continue;
      g.connections[src][j] = 0;
      r.repairs.push_back(
          {"r1", "dropped " + unit_label(src) + "<-" + unit_label(u) + " (" + unit_label(u) + " inactive)"});
    }
    if (g.fuse_inputs[u]) {
      g.fuse_inputs[u] = 0;
      r.repairs.push_back({"r1", "dropped F<-" + unit_label(u) + " (" + unit_label(u) + " inactive)"});
    }
  }

  for (int u = 0; u < S; ++u) {
    if (g.active(u) || !g.supervision[u]) continue;
    g.supervision[u] = 0;
    r.repairs.push_back({"r3", "cleared supervision on inactive " + unit_label(u)});
  }

  if (std::none_of(g.fuse_inputs.begin(), g.fuse_inputs.end(), [](int b) { return b != 0; })) {
    int deepest = S - 1;
    while (!g.active(deepest)) --deepest;
    g.fuse_inputs[deepest] = 1;
    r.repairs.push_back({"r2", "fuse unit had no input; connected " + unit_label(deepest)});
  }
  return r;
}

Genome random_genome(Rng& rng, int stages, int nodes) {
  Genome g = empty_genome(stages, nodes);
  for (const GeneRef& ref : enumerate_genes(g)) set_gene(g, ref, rng.uniform_int(gene_range(g, ref)));
  return validate_and_repair(g).genome;
}

LsuGenes aspp_pattern(int nodes) {
  LsuGenes l;
  for (int p = 0; p < nodes; ++p) {
    l.edges.push_back(0);
    l.ops.push_back(operator_index(3, kDilations[p % 4]));
  }
  return l;
}

Genome aspp_seed(Rng& rng, int stages, int nodes) {
  if (nodes < 4) throw std::invalid_argument("aspp_seed needs P >= 4, got " + std::to_string(nodes));
  Genome g = empty_genome(stages, nodes);
  for (const GeneRef& ref : enumerate_genes(g)) {
    if (ref.area == GeneArea::kLsuEdge || ref.area == GeneArea::kLsuOp) continue;
    set_gene(g, ref, rng.uniform_int(gene_range(g, ref)));
  }
  for (auto& l : g.lsus) l = aspp_pattern(nodes);

  std::vector<GeneRef> mutable_lsu_genes;
  for (const GeneRef& ref : enumerate_genes(g))
    if ((ref.area == GeneArea::kLsuEdge || ref.area == GeneArea::kLsuOp) && gene_range(g, ref) > 1)
      mutable_lsu_genes.push_back(ref);
  const GeneRef pick = mutable_lsu_genes[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(mutable_lsu_genes.size())))];
  const int old = get_gene(g, pick);
  int fresh = rng.uniform_int(gene_range(g, pick) - 1);
  if (fresh >= old) ++fresh;
  set_gene(g, pick, fresh);
  return validate_and_repair(g).genome;
}

Genome srn_preset(int nodes) {
  Genome g = empty_genome(5, nodes);
  for (int u = 0; u < 5; ++u) {
    g.sideouts[u] = 1;
    g.supervision[u] = 1;
    g.fuse_inputs[u] = 1;
    if (!g.connections[u].empty()) g.connections[u][0] = 1;
  }
  return g;
}

// ---- text format ----

namespace {

std::string bits_string(const std::vector<int>& bits) {
  if (bits.empty()) return "-";
  std::string s;
  for (int b : bits) s.push_back(b ? '1' : '0');
  return s;
}

void append_lsu(std::ostringstream& os, const LsuGenes& l) {
  os << " lsu e";
  for (int e : l.edges) os << ' ' << e;
  os << " o";
  for (int o : l.ops) os << ' ' << o;
}

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::vector<Token> split_tokens(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    out.push_back({line.substr(start, i - start), static_cast<int>(start) + 1});
  }
  return out;
}

class LineParser {
 public:
  LineParser(int line_no, std::string_view line) : line_no_(line_no), tokens_(split_tokens(line)), end_col_(static_cast<int>(line.size()) + 1) {}

  [[noreturn]] void fail(int column, const std::string& msg) const {
    throw std::invalid_argument("line " + std::to_string(line_no_) + ", column " + std::to_string(column) + ": " + msg);
  }

  int column() const { return pos_ < tokens_.size() ? tokens_[pos_].column : end_col_; }

  const Token& next(const std::string& what) {
    if (pos_ >= tokens_.size()) fail(end_col_, "expected " + what + ", found end of line");
    return tokens_[pos_++];
  }

  void expect(std::string_view word) {
    const Token& t = next("'" + std::string(word) + "'");
    if (t.text != word) fail(t.column, "expected '" + std::string(word) + "', found '" + std::string(t.text) + "'");
  }

  int integer(const std::string& what) {
    const Token& t = next(what);
    int v = 0;
    const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size())
      fail(t.column, "expected integer " + what + ", found '" + std::string(t.text) + "'");
    last_col_ = t.column;
    return v;
  }

  std::vector<int> bits(std::size_t count, const std::string& what) {
    const Token& t = next(what);
    last_col_ = t.column;
    if (count == 0) {
      if (t.text != "-") fail(t.column, what + " has no legal bits here; expected '-', found '" + std::string(t.text) + "'");
      return {};
    }
    if (t.text.size() != count)
      fail(t.column, what + " must have " + std::to_string(count) + " bits, found '" + std::string(t.text) + "'");
    std::vector<int> out;
    for (std::size_t i = 0; i < t.text.size(); ++i) {
      const char c = t.text[i];
      if (c != '0' && c != '1')
        fail(t.column + static_cast<int>(i), what + " contains non-binary character '" + std::string(1, c) + "'");
      out.push_back(c - '0');
    }
    return out;
  }

  LsuGenes lsu(int nodes, const std::string& unit) {
    LsuGenes l;
    expect("lsu");
    expect("e");
    for (int p = 1; p <= nodes; ++p) {
      const int e = integer(unit + " e_" + std::to_string(p));
      if (e < 0 || e >= p)
        fail(last_col_, "gene " + unit + " e_" + std::to_string(p) + " = " + std::to_string(e) + " must be in [0, " +
                            std::to_string(p - 1) + "]");
      l.edges.push_back(e);
    }
    expect("o");
    for (int p = 1; p <= nodes; ++p) {
      const int o = integer(unit + " o_" + std::to_string(p));
      if (o < 0 || o >= kVocabSize)
        fail(last_col_, "gene " + unit + " o_" + std::to_string(p) + " = " + std::to_string(o) +
                            " must be in [0, " + std::to_string(kVocabSize - 1) + "]");
      l.ops.push_back(o);
    }
    return l;
  }

  void finish() {
    if (pos_ < tokens_.size())
      fail(tokens_[pos_].column, "unexpected trailing token '" + std::string(tokens_[pos_].text) + "'");
  }

  int last_column() const { return last_col_; }

 private:
  int line_no_;
  std::vector<Token> tokens_;
  int end_col_;
  std::size_t pos_ = 0;
  int last_col_ = 1;
};

}  // namespace

std::string encode_text(const Genome& g) {
  check_well_formed(g);
  std::ostringstream os;
  os << "ALSN-GENOME v1\n";
  os << "S " << g.stages << '\n';
  os << "P " << g.nodes << '\n';
  os << "A1 " << bits_string(g.sideouts) << '\n';
  os << "A4 " << bits_string(g.supervision) << '\n';
  for (int u = 0; u < g.stages; ++u) {
    os << 'U' << (u + 1) << " conn " << bits_string(g.connections[u]);
    append_lsu(os, g.lsus[u]);
    os << '\n';
  }
  os << "F  in " << bits_string(g.fuse_inputs);
  append_lsu(os, g.lsus[g.fuse_index()]);
  os << '\n';
  return os.str();
}

Genome decode_text(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }

  std::size_t idx = 0;
  auto next_line = [&](const std::string& what) -> std::pair<int, std::string_view> {
    while (idx < lines.size() && split_tokens(lines[idx]).empty()) ++idx;
    if (idx >= lines.size())
      throw std::invalid_argument("line " + std::to_string(lines.size()) + ", column 1: unexpected end of input, expected " + what);
    const int no = static_cast<int>(idx) + 1;
    return {no, lines[idx++]};
  };

  {
    auto [no, line] = next_line("header");
    LineParser p(no, line);
    p.expect("ALSN-GENOME");
    p.expect("v1");
    p.finish();
  }
  int S = 0, P = 0;
  {
    auto [no, line] = next_line("S header");
    LineParser p(no, line);
    p.expect("S");
    S = p.integer("S");
    if (S < 2 || S > 16) p.fail(p.last_column(), "S = " + std::to_string(S) + " outside [2, 16]");
    p.finish();
  }
  {
    auto [no, line] = next_line("P header");
    LineParser p(no, line);
    p.expect("P");
    P = p.integer("P");
    if (P < 0 || P > 64) p.fail(p.last_column(), "P = " + std::to_string(P) + " outside [0, 64]");
    p.finish();
  }

  Genome g = empty_genome(S, P);
  std::vector<bool> seen_unit(static_cast<std::size_t>(S), false);
  bool seen_a1 = false, seen_a4 = false, seen_f = false;

  for (;;) {
    while (idx < lines.size() && split_tokens(lines[idx]).empty()) ++idx;
    if (idx >= lines.size()) break;
    const int no = static_cast<int>(idx) + 1;
    const std::string_view line = lines[idx++];
    LineParser p(no, line);
    const int key_col = p.column();
    const std::string key(p.next("section").text);
    auto once = [&](bool& seen) {
      if (seen) p.fail(key_col, "duplicate section '" + key + "'");
      seen = true;
    };
    if (key == "A1") {
      once(seen_a1);
      g.sideouts = p.bits(static_cast<std::size_t>(S), "A1");
    } else if (key == "A4") {
      once(seen_a4);
      g.supervision = p.bits(static_cast<std::size_t>(S), "A4");
    } else if (key == "F") {
      once(seen_f);
      p.expect("in");
      g.fuse_inputs = p.bits(static_cast<std::size_t>(S), "F in");
      g.lsus[g.fuse_index()] = p.lsu(P, "F");
    } else if (key.size() >= 2 && key[0] == 'U') {
      int unit = 0;
      const auto [ptr, ec] = std::from_chars(key.data() + 1, key.data() + key.size(), unit);
      if (ec != std::errc() || ptr != key.data() + key.size() || unit < 1 || unit > S)
        p.fail(key_col, "unknown unit '" + key + "' (S = " + std::to_string(S) + ")");
      bool seen = seen_unit[static_cast<std::size_t>(unit - 1)];
      once(seen);
      seen_unit[static_cast<std::size_t>(unit - 1)] = true;
      p.expect("conn");
      g.connections[unit - 1] =
          p.bits(static_cast<std::size_t>(Genome::connection_count(S, unit - 1)), key + " conn");
      g.lsus[unit - 1] = p.lsu(P, key);
    } else if (key == "S" || key == "P") {
      p.fail(key_col, "duplicate section '" + key + "'");
    } else {
      p.fail(key_col, "unknown section '" + key + "'");
    }
    p.finish();
  }

  const int last = static_cast<int>(lines.size());
  auto missing = [&](const std::string& what) {
    throw std::invalid_argument("line " + std::to_string(last) + ", column 1: missing section " + what);
  };
  if (!seen_a1) missing("A1");
  if (!seen_a4) missing("A4");
  for (int u = 0; u < S; ++u)
    if (!seen_unit[static_cast<std::size_t>(u)]) missing(unit_label(u));
  if (!seen_f) missing("F");
  return g;
}

}  // namespace alsn
