#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "alsn/arch.hpp"
#include "alsn/genome.hpp"
#include "oracles.hpp"

using namespace alsn;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string decode_error(const std::string& text) {
  try {
    decode_text(text);
  } catch (const std::invalid_argument& e) {
    return e.what();
  }
  return {};
}

bool has_rule(const RepairResult& r, const std::string& rule) {
  for (const auto& rep : r.repairs)
    if (rep.rule == rule) return true;
  return false;
}

}  // namespace

TEST_CASE("operator vocabulary order") {
  CHECK(operator_spec(0).is_skip());
  CHECK(operator_index(1, 1) == 1);
  CHECK(operator_index(1, 8) == 4);
  CHECK(operator_index(3, 1) == 5);
  CHECK(operator_index(3, 8) == 8);
  CHECK(operator_index(5, 1) == 9);
  CHECK(operator_index(5, 8) == 12);
  for (int i = 1; i < kVocabSize; ++i) CHECK(operator_index(operator_spec(i).kernel, operator_spec(i).dilation) == i);
  CHECK_THROWS(operator_spec(13));
  CHECK_THROWS(operator_index(7, 1));
}

TEST_CASE("connection bits exist only for the two next deeper stages") {
  CHECK(Genome::connection_count(5, 0) == 2);
  CHECK(Genome::connection_count(5, 2) == 2);
  CHECK(Genome::connection_count(5, 3) == 1);
  CHECK(Genome::connection_count(5, 4) == 0);
}

TEST_CASE("SRN preset text matches the golden file") {
  CHECK(encode_text(srn_preset()) == read_text(ALSN_TEST_DATA "/srn.genome"));
  CHECK(decode_text(read_text(ALSN_TEST_DATA "/srn.genome")) == srn_preset());
  CHECK(validate_and_repair(srn_preset()).repairs.empty());
}

TEST_CASE("text round trip over random genomes of many sizes") {
  Rng rng(11);
  for (int rep = 0; rep < 300; ++rep) {
    const Genome g = random_genome(rng, 2 + rng.uniform_int(10), rng.uniform_int(9));
    CHECK(decode_text(encode_text(g)) == g);
  }
}

TEST_CASE("decode diagnostics") {
  const std::string good = encode_text(srn_preset());
  SUBCASE("an edge pointing forward names the gene") {
    std::string text = good;
    text.replace(text.find("U1 conn 10 lsu e 0 0 0 0"), 24, "U1 conn 10 lsu e 0 0 5 0");
    const std::string err = decode_error(text);
    CHECK(err.find("U1 e_3") != std::string::npos);
    CHECK(err.find("line 6") != std::string::npos);
  }
  SUBCASE("operator out of range") {
    std::string text = good;
    text.replace(text.find("o 0 0 0 0"), 9, "o 0 13 0 0");
    CHECK(decode_error(text).find("o_2") != std::string::npos);
  }
  SUBCASE("duplicate section") {
    std::string text = good;
    text.insert(text.find("A4"), "A1 11111\n");
    CHECK(decode_error(text).find("duplicate section") != std::string::npos);
  }
  SUBCASE("header mismatch") {
    std::string text = good;
    text.replace(text.find("S 5"), 3, "S 4");
    CHECK_FALSE(decode_error(text).empty());
    CHECK_FALSE(decode_error("ALSN-GENOME v2\n").empty());
  }
  SUBCASE("wrong bit count and missing section") {
    std::string text = good;
    text.replace(text.find("A1 11111"), 8, "A1 1111");
    CHECK(decode_error(text).find("column") != std::string::npos);
    std::string cut = good.substr(0, good.find("F "));
    CHECK(decode_error(cut).find("missing section") != std::string::npos);
  }
  SUBCASE("the unit without legal bits uses a dash") {
    std::string text = good;
    text.replace(text.find("U5 conn -"), 9, "U5 conn 0");
    CHECK_FALSE(decode_error(text).empty());
  }
}

TEST_CASE("repair rules") {
  SUBCASE("r4: nothing active") {
    Genome g = empty_genome(5, 2);
    const RepairResult r = validate_and_repair(g);
    CHECK(has_rule(r, "r4"));
    CHECK(r.genome.sideouts == std::vector<int>{0, 0, 0, 0, 1});
    CHECK(r.genome.fuse_inputs == std::vector<int>{0, 0, 0, 0, 1});
  }
  SUBCASE("r2: fuse without inputs gets the deepest active unit") {
    Genome g = srn_preset();
    g.fuse_inputs.assign(5, 0);
    g.sideouts[4] = 0;
    const RepairResult r = validate_and_repair(g);
    CHECK(has_rule(r, "r2"));
    CHECK(r.genome.fuse_inputs == std::vector<int>{0, 0, 0, 1, 0});
  }
  SUBCASE("r1 and r3: an inactive unit loses links, fuse input and supervision") {
    Genome g = srn_preset();
    g.sideouts[2] = 0;
    const RepairResult r = validate_and_repair(g);
    CHECK(has_rule(r, "r1"));
    CHECK(has_rule(r, "r3"));
    CHECK(r.genome.connections[1][0] == 0);  // U2 <- U3
    CHECK(r.genome.connections[2][0] == 0);  // U3 <- U4
    CHECK(r.genome.supervision[2] == 0);
    CHECK(r.genome.fuse_inputs[2] == 0);
    CHECK(oracle::check_genome(r.genome).empty());
  }
  SUBCASE("idempotent on arbitrary genomes") {
    Rng rng(12);
    for (int rep = 0; rep < 500; ++rep) {
      Genome g = empty_genome(2 + rng.uniform_int(6), rng.uniform_int(5));
      for (const GeneRef& ref : enumerate_genes(g)) set_gene(g, ref, rng.uniform_int(gene_range(g, ref)));
      const RepairResult once = validate_and_repair(g);
      CHECK(oracle::check_genome(once.genome).empty());
      const RepairResult twice = validate_and_repair(once.genome);
      CHECK(twice.repairs.empty());
      CHECK(twice.genome == once.genome);
    }
  }
}

TEST_CASE("gene ranges") {
  const Genome g = srn_preset();
  int edges = 0;
  for (const GeneRef& ref : enumerate_genes(g)) {
    if (ref.area == GeneArea::kLsuEdge) {
      CHECK(gene_range(g, ref) == ref.slot + 1);
      ++edges;
    } else if (ref.area == GeneArea::kLsuOp) {
      CHECK(gene_range(g, ref) == kVocabSize);
    } else {
      CHECK(gene_range(g, ref) == 2);
    }
  }
  CHECK(edges == 6 * 4);
  Genome bad = g;
  bad.lsus[0].edges[1] = 2;
  CHECK_THROWS_AS(check_well_formed(bad), std::invalid_argument);
}

TEST_CASE("random genomes and ASPP seeds") {
  Rng a(13), b(13);
  CHECK(random_genome(a) == random_genome(b));
  CHECK(aspp_seed(a) == aspp_seed(b));
  const LsuGenes pattern = aspp_pattern(4);
  CHECK(pattern.edges == std::vector<int>{0, 0, 0, 0});
  CHECK(pattern.ops == std::vector<int>{5, 6, 7, 8});
  CHECK_THROWS(aspp_seed(a, 5, 3));
  for (int rep = 0; rep < 200; ++rep) {
    const Genome g = aspp_seed(a);
    CHECK(oracle::check_genome(g).empty());
    int changed = 0;
    for (const auto& l : g.lsus)
      for (int p = 0; p < 4; ++p) changed += (l.edges[p] != pattern.edges[p]) + (l.ops[p] != pattern.ops[p]);
    CHECK(changed == 1);
    CHECK(oracle::check_genome(random_genome(a)).empty());
  }
}

TEST_CASE("segments") {
  const Genome g = srn_preset();
  const auto segs = enumerate_segments(g);
  // A1, A4, conn U1..U4, fuse inputs, 6 LSU blocks.
  CHECK(segs.size() == 13);
  std::set<std::string> names;
  for (const auto& s : segs) names.insert(segment_name(s));
  CHECK(names.size() == segs.size());
}

TEST_CASE("decoded plans satisfy the structural invariants") {
  Rng rng(14);
  for (int rep = 0; rep < 1000; ++rep) {
    NetConfig cfg;
    cfg.stages = 2 + rng.uniform_int(5);
    cfg.nodes = rng.uniform_int(5);
    const Genome g = random_genome(rng, cfg.stages, cfg.nodes);
    const std::string why = oracle::check_plan(g, build_plan(g, cfg));
    CHECK_MESSAGE(why.empty(), why << "\n" << encode_text(g));
  }
}

TEST_CASE("plan examples") {
  const NetworkPlan srn = build_plan(srn_preset(), NetConfig{});
  REQUIRE(srn.units.size() == 5);
  CHECK(srn.connection_count() == 4);
  for (const auto& u : srn.units)
    for (const auto& s : u.sources)
      if (s.kind == SourceKind::kUnit) {
        CHECK(s.stage == u.stage + 1);
        CHECK(s.upsample == 2);
      }
  CHECK(srn.heads.size() == 6);
  CHECK(srn.fuse.sources.size() == 5);
  CHECK(srn.fuse.stage == 0);

  Genome one = empty_genome(5, 4);
  one.sideouts = {0, 0, 0, 0, 1};
  const NetworkPlan p = build_plan(one, NetConfig{});
  REQUIRE(p.units.size() == 1);
  CHECK(p.units[0].stage == 4);
  CHECK(p.fuse.sources.size() == 1);
  CHECK(p.fuse.stage == 4);
  CHECK(p.heads.size() == 1);
  CHECK(p.heads[0].upsample == 16);

  NetConfig wrong;
  wrong.nodes = 3;
  CHECK_THROWS_AS(build_plan(srn_preset(), wrong), std::invalid_argument);
}
