// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                 run everything
//   acceptance --only 1,2,9    run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "alsn/arch.hpp"
#include "alsn/data.hpp"
#include "alsn/genome.hpp"
#include "alsn/graph.hpp"
#include "alsn/linalg.hpp"
#include "alsn/metrics.hpp"
#include "alsn/search.hpp"
#include "alsn/trainer.hpp"
#include "oracles.hpp"

using namespace alsn;
using oracle::TensorD;

namespace {

constexpr std::uint64_t kCorpusSeed = 20240601;
constexpr int kCorpusSize = 250;
constexpr int kCanvas = 64;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::vector<Sample>& corpus() {
  static const std::vector<Sample> samples = generate(kCorpusSeed, kCorpusSize, kCanvas);
  return samples;
}

// ---- 1: gradients ----

struct Leaf {
  std::string name;
  TensorD tensor;
};

// Builds x -> body -> 1x1 head -> sigmoid -> balanced BCE in float64 and
// compares every leaf gradient with central differences.
double check_instance(std::deque<Leaf>& leaves, const TensorD& target,
                      const std::function<NodeId(Graph<double>&, std::vector<NodeId>&)>& body,
                      bool logit_loss) {
  std::vector<NodeId> ids;
  Graph<double>* last = nullptr;
  Graph<double> keep;
  auto run = [&](bool with_grad) {
    Graph<double> g;
    ids.clear();
    for (auto& l : leaves) ids.push_back(g.variable(l.tensor));
    const NodeId head_in = body(g, ids);
    const NodeId loss = logit_loss ? g.balanced_bce_logits(head_in, target) : g.balanced_bce(head_in, target);
    const double v = g.scalar(loss);
    if (with_grad) {
      g.backward(loss);
      keep = std::move(g);
      last = &keep;
    }
    return v;
  };
  std::vector<oracle::FdLeaf> fd;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    fd.push_back({leaves[i].name, &leaves[i].tensor.values, [&, i] {
                    std::vector<double> gr(last->grad(ids[i]).begin(), last->grad(ids[i]).end());
                    if (gr.empty()) gr.assign(leaves[i].tensor.size(), 0.0);
                    return gr;
                  }});
  }
  return oracle::finite_difference(run, fd).worst;
}

TensorD random_target(Rng& rng, Shape shape) {
  TensorD t(std::move(shape));
  for (double& v : t.values) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
  return t;
}

Outcome criterion1() {
  Rng rng(101);
  double worst = 0;
  std::string worst_case;
  int instances = 0;
  double worst_value = 0;
  auto note = [&](double e, const std::string& what) {
    ++instances;
    if (e > worst) {
      worst = e;
      worst_case = what;
    }
  };

  // Every vocabulary operator as an LSU node applies it: conv + relu, or skip.
  for (int op = 0; op < kVocabSize; ++op) {
    const OperatorSpec spec = operator_spec(op);
    for (int rep = 0; rep < 20; ++rep) {
      const int c = 2, h = 6 + rng.uniform_int(3), w = 6 + rng.uniform_int(3);
      std::deque<Leaf> leaves;
      leaves.push_back({"x", oracle::random_tensor(rng, {c, h, w})});
      if (!spec.is_skip()) {
        leaves.push_back({"w", oracle::random_tensor(rng, {c, c, spec.kernel, spec.kernel}, -0.5, 0.5)});
        leaves.push_back({"b", oracle::random_tensor(rng, {c}, -0.2, 0.2)});
      }
      leaves.push_back({"hw", oracle::random_tensor(rng, {1, c, 1, 1})});
      leaves.push_back({"hb", oracle::random_tensor(rng, {1}, -0.2, 0.2)});
      const TensorD target = random_target(rng, {1, h, w});

      // Value against the direct-loop oracle.
      {
        TensorD z = leaves[0].tensor;
        if (!spec.is_skip()) z = oracle::relu(oracle::conv2d(z, leaves[1].tensor, leaves[2].tensor, spec.dilation));
        const std::size_t hi = leaves.size() - 2;
        TensorD logits = oracle::conv2d(z, leaves[hi].tensor, leaves[hi + 1].tensor, 1);
        std::vector<double> p;
        for (double v : logits.values) p.push_back(1 / (1 + std::exp(-v)));
        Graph<double> g;
        std::vector<NodeId> ids;
        for (auto& l : leaves) ids.push_back(g.variable(l.tensor));
        NodeId y = ids[0];
        if (!spec.is_skip()) y = g.relu(g.conv2d(y, ids[1], ids[2], spec.dilation));
        const NodeId loss = g.balanced_bce(g.sigmoid(g.conv2d(y, ids[hi], ids[hi + 1], 1)), target);
        worst_value = std::max(worst_value, std::abs(g.scalar(loss) - oracle::balanced_bce(p, target.values)));
      }

      const double e = check_instance(
          leaves, target,
          [&](Graph<double>& g, std::vector<NodeId>& ids) {
            NodeId y = ids[0];
            std::size_t k = 1;
            if (!spec.is_skip()) {
              y = g.relu(g.conv2d(y, ids[1], ids[2], spec.dilation));
              k = 3;
            }
            return g.sigmoid(g.conv2d(y, ids[k], ids[k + 1], 1));
          },
          false);
      note(e, operator_name(op));
    }
  }

  // 1x1 heads on wider inputs.
  for (int rep = 0; rep < 20; ++rep) {
    const int c = 1 + rng.uniform_int(6), h = 4 + rng.uniform_int(5), w = 4 + rng.uniform_int(5);
    std::deque<Leaf> leaves{{"x", oracle::random_tensor(rng, {c, h, w})},
                            {"hw", oracle::random_tensor(rng, {1, c, 1, 1})},
                            {"hb", oracle::random_tensor(rng, {1})}};
    const TensorD target = random_target(rng, {1, h, w});
    note(check_instance(
             leaves, target,
             [](Graph<double>& g, std::vector<NodeId>& ids) { return g.sigmoid(g.conv2d(ids[0], ids[1], ids[2], 1)); },
             false),
         "head");
  }

  // Bilinear upsampling ahead of a head, as the side outputs use it.
  for (int rep = 0; rep < 20; ++rep) {
    const int c = 2, h = 2 + rng.uniform_int(4), w = 2 + rng.uniform_int(4), f = rep % 2 ? 4 : 2;
    std::deque<Leaf> leaves{{"x", oracle::random_tensor(rng, {c, h, w})},
                            {"hw", oracle::random_tensor(rng, {1, c, 1, 1})},
                            {"hb", oracle::random_tensor(rng, {1})}};
    const TensorD target = random_target(rng, {1, h * f, w * f});
    Graph<double> g;
    const TensorD up = g.value(g.upsample_bilinear(g.constant(leaves[0].tensor), f));
    const TensorD ref = oracle::upsample(leaves[0].tensor, f);
    for (std::size_t i = 0; i < up.values.size(); ++i)
      worst_value = std::max(worst_value, std::abs(up.values[i] - ref.values[i]));
    note(check_instance(
             leaves, target,
             [f](Graph<double>& g, std::vector<NodeId>& ids) {
               return g.sigmoid(g.upsample_bilinear(g.conv2d(ids[0], ids[1], ids[2], 1), f));
             },
             false),
         "upsample x" + std::to_string(f));
  }

  // The loss alone, on probabilities and on logits.
  for (int rep = 0; rep < 20; ++rep) {
    const int h = 3 + rng.uniform_int(6), w = 3 + rng.uniform_int(6);
    std::deque<Leaf> probs{{"p", oracle::random_tensor(rng, {1, h, w}, 0.02, 0.98)}};
    std::deque<Leaf> logits{{"z", oracle::random_tensor(rng, {1, h, w}, -4, 4)}};
    const TensorD target = random_target(rng, {1, h, w});
    note(check_instance(probs, target, [](Graph<double>&, std::vector<NodeId>& ids) { return ids[0]; }, false),
         "bce");
    note(check_instance(logits, target, [](Graph<double>&, std::vector<NodeId>& ids) { return ids[0]; }, true),
         "bce on logits");
  }

  Outcome o;
  o.pass = worst < 1e-4 && worst_value < 1e-9;
  o.detail = std::to_string(instances) + " instances, worst relative gradient error " + fmt("%.2e", worst) + " (" +
             worst_case + "), worst value error vs direct loops " + fmt("%.1e", worst_value);
  return o;
}

// ---- 2: LSU vs path enumeration ----

Outcome criterion2() {
  Rng rng(202);
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int nodes = rng.uniform_int(5);
    LsuGenes genes;
    for (int p = 0; p < nodes; ++p) {
      genes.edges.push_back(rng.uniform_int(p + 1));
      genes.ops.push_back(rng.uniform_int(kVocabSize));
    }
    const LsuGraph graph = lsu_graph(genes);
    const int c = 1 + rng.uniform_int(3), h = 6 + rng.uniform_int(7), w = 6 + rng.uniform_int(7);
    ParameterSet<double> params;
    LsuModule<double> module(graph, c, params, "lsu", rng);
    std::vector<const TensorD*> weights, biases;
    for (int p = 1; p <= nodes; ++p) {
      const auto& layer = module.layer(p);
      if (layer.weight) {
        for (double& b : layer.bias->value.values) b = rng.uniform(-0.3, 0.3);
        weights.push_back(&layer.weight->value);
        biases.push_back(&layer.bias->value);
      } else {
        weights.push_back(nullptr);
        biases.push_back(nullptr);
      }
    }
    const TensorD v = oracle::random_tensor(rng, {c, h, w});
    Graph<double> g;
    const TensorD got = g.value(module.forward(g, g.constant(v)));
    const TensorD want = oracle::lsu_by_paths(graph, weights, biases, v);
    for (std::size_t i = 0; i < got.values.size(); ++i)
      worst = std::max(worst, std::abs(got.values[i] - want.values[i]));
  }
  return {worst < 1e-6, "100 LSUs with P <= 4, max |graph - path sum| = " + fmt("%.2e", worst)};
}

// ---- 3: subspace dimensions ----

Outcome criterion3() {
  Rng rng(303);
  const int n = 32;
  int bad = 0;
  std::string first;
  for (int rep = 0; rep < 100; ++rep) {
    const int k = rng.uniform_int(9);            // planted intersection
    const int ra = rng.uniform_int(11), rb = rng.uniform_int(11);
    const int total = k + ra + rb;
    Matrix basis(n, total);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < total; ++j) basis(i, j) = rng.uniform(-1, 1);
    // Spanning sets: each subspace's basis mixed by a random square matrix,
    // plus a few redundant combinations.
    auto spanning = [&](int own_start, int own_count) {
      const int dim = k + own_count;
      Matrix b(n, dim);
      b.leftCols(k) = basis.leftCols(k);
      b.rightCols(own_count) = basis.middleCols(own_start, own_count);
      const int extra = dim > 0 ? rng.uniform_int(3) : 0;
      Matrix mix(dim, dim + extra);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim + extra; ++j) mix(i, j) = rng.uniform(-1, 1) + (i == j ? 2.0 : 0.0);
      Matrix out = b * mix;
      if (out.cols() == 0) out = Matrix::Zero(n, 1);  // the zero subspace
      return out;
    };
    const Matrix a = spanning(k, ra), b = spanning(k + ra, rb);
    const SubspaceDims d = subspace_dims(a, b, default_rank_tolerance(a, b));
    const bool ok = d.dim_a == k + ra && d.dim_b == k + rb && d.dim_intersect == k && d.dim_sum == total &&
                    d.dim_sum == d.dim_a + d.dim_b - d.dim_intersect;
    if (!ok && bad++ == 0) {
      std::ostringstream os;
      os << "pair " << rep << ": planted (" << k + ra << "," << k + rb << "," << total << "," << k << ") got ("
         << d.dim_a << "," << d.dim_b << "," << d.dim_sum << "," << d.dim_intersect << ")";
      first = os.str();
    }
  }
  return {bad == 0, bad == 0 ? "100 planted pairs in R^32, all four dimensions and the identity exact"
                             : std::to_string(bad) + " mismatches; " + first};
}

// ---- 4: encoding ----

Genome raw_random_genome(Rng& rng, int stages, int nodes) {
  Genome g = empty_genome(stages, nodes);
  for (const GeneRef& ref : enumerate_genes(g)) set_gene(g, ref, rng.uniform_int(gene_range(g, ref)));
  return g;
}

Outcome criterion4() {
  Rng rng(404);
  int roundtrip_fail = 0, idempotence_fail = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int stages = 2 + rng.uniform_int(7), nodes = rng.uniform_int(7);
    const Genome g = random_genome(rng, stages, nodes);
    if (!(decode_text(encode_text(g)) == g)) ++roundtrip_fail;
    const RepairResult once = validate_and_repair(raw_random_genome(rng, stages, nodes));
    const RepairResult twice = validate_and_repair(once.genome);
    if (!twice.repairs.empty() || !(twice.genome == once.genome)) ++idempotence_fail;
  }

  const Genome srn = srn_preset();
  std::string srn_problem;
  if (!validate_and_repair(srn).repairs.empty()) srn_problem = "needs repairs";
  const NetworkPlan plan = build_plan(srn, NetConfig{});
  int links = 0, adjacent = 0, supervised = 0;
  for (const auto& u : plan.units)
    for (const auto& s : u.sources)
      if (s.kind == SourceKind::kUnit) {
        ++links;
        if (s.stage == u.stage + 1 && s.upsample == 2) ++adjacent;
      }
  for (const auto& h : plan.heads)
    if (h.unit != kFuseHead && h.supervised) ++supervised;
  if (plan.units.size() != 5) srn_problem += " side-outputs " + std::to_string(plan.units.size());
  if (links != 4 || adjacent != 4) srn_problem += " connections " + std::to_string(links);
  if (supervised != 5) srn_problem += " supervisions " + std::to_string(supervised);
  if (plan.fuse.sources.size() != 5) srn_problem += " fuse fan-in " + std::to_string(plan.fuse.sources.size());
  if (!(decode_text(encode_text(srn)) == srn)) srn_problem += " round-trip";

  Outcome o;
  o.pass = roundtrip_fail == 0 && idempotence_fail == 0 && srn_problem.empty();
  o.detail = "1000 round-trips (" + std::to_string(roundtrip_fail) + " failed), repair idempotence (" +
             std::to_string(idempotence_fail) + " failed), SRN preset " +
             (srn_problem.empty() ? std::string("5 side-outputs, 4 adjacent links, 5 supervisions, fuse fan-in 5")
                                  : srn_problem);
  return o;
}

// ---- 5: closure under the genetic operators ----

Outcome criterion5() {
  SearchConfig cfg;
  cfg.master_seed = 505;
  Rng pick(5050);
  std::vector<Individual> pop = init_population(cfg);
  int checked = 0, bad = 0;
  std::string first;
  auto audit = [&](const Individual& ind) {
    ++checked;
    std::string why = oracle::check_genome(ind.genome);
    if (why.empty()) why = oracle::check_plan(ind.genome, build_plan(ind.genome, cfg.net));
    if (!why.empty() && bad++ == 0) first = why;
  };
  for (const auto& ind : pop) audit(ind);
  for (int gen = 1; gen <= 1000; ++gen) {
    // Survivors picked at random: fitness plays no part in closure.
    pick.shuffle(pop.begin(), pop.end());
    HallOfFame hof;
    hof.members.assign(pop.begin(), pop.begin() + cfg.survivors);
    const std::vector<Individual> kids = breed(hof, gen, cfg);
    for (const auto& k : kids) audit(k);
    pop = hof.members;
    pop.insert(pop.end(), kids.begin(), kids.end());
  }
  return {bad == 0, std::to_string(checked) + " genomes checked, " + std::to_string(bad) + " violations" +
                        (first.empty() ? "" : " (first: " + first + ")")};
}

// ---- 6 and 7: search ----

SearchConfig search_config(std::uint64_t seed, int workers) {
  SearchConfig cfg;
  cfg.population = 24;
  cfg.survivors = 8;
  cfg.generations = 10;
  cfg.fitness_iters = 200;
  cfg.master_seed = seed;
  cfg.net.channels = 8;
  cfg.net.image_size = kCanvas;
  cfg.workers = workers;
  return cfg;
}

const DatasetSplit& corpus_split() {
  static const DatasetSplit split = split_dataset(corpus(), 0.2);
  return split;
}

std::map<std::uint64_t, SearchReport>& search_cache() {
  static std::map<std::uint64_t, SearchReport> cache;
  return cache;
}

const SearchReport& searched(std::uint64_t seed, double* elapsed = nullptr) {
  auto& cache = search_cache();
  auto it = cache.find(seed);
  if (it == cache.end()) {
    const auto t0 = Clock::now();
    it = cache.emplace(seed, run_search(search_config(seed, 1), corpus_split().train)).first;
    if (elapsed) *elapsed = seconds_since(t0);
    std::fprintf(stderr, "  search seed %llu: %.0f s, best fitness %.6f\n", static_cast<unsigned long long>(seed),
                 seconds_since(t0), it->second.best.fitness.value_or(NAN));
  }
  return it->second;
}

std::string report_text(const SearchReport& r) {
  SearchState st{static_cast<int>(r.trace.size()) - 1, 0, r.hall_of_fame, r.trace};
  return format_state(st) + encode_text(r.best.genome);
}

Outcome criterion6() {
  double first_time = 0;
  const SearchReport& a = searched(1, &first_time);
  bool monotone = true;
  for (std::size_t i = 1; i < a.trace.size(); ++i) monotone = monotone && a.trace[i].best_fitness <= a.trace[i - 1].best_fitness;
  const SearchReport b = run_search(search_config(1, 1), corpus_split().train);
  const SearchReport c = run_search(search_config(1, 3), corpus_split().train);
  const std::string ta = report_text(a);
  const bool rerun_same = ta == report_text(b);
  const bool workers_same = ta == report_text(c);
  Outcome o;
  o.pass = monotone && rerun_same && workers_same && a.trace.size() == 11 && first_time < 900;
  o.detail = std::string("trace ") + (monotone ? "non-increasing" : "INCREASES") + " over " +
             std::to_string(a.trace.size()) + " generations (" + fmt("%.5f", a.trace.front().best_fitness) + " -> " +
             fmt("%.5f", a.trace.back().best_fitness) + "), rerun " + (rerun_same ? "identical" : "DIFFERS") +
             ", 3 workers " + (workers_same ? "identical" : "DIFFER") + ", one search took " +
             fmt("%.0f", first_time) + " s";
  return o;
}

double retrain_f(const Genome& g, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.epochs = 25;
  cfg.seed = seed;
  NetConfig net;
  net.image_size = kCanvas;
  const TrainResult r = train(g, net, cfg, corpus_split().train, corpus_split().val);
  return r.model.best_val_f;
}

Outcome criterion7() {
  constexpr std::uint64_t kRandomTag = 0x7a3d;
  int wins = 0;
  std::ostringstream os;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const SearchReport& r = searched(seed);
    const double best = retrain_f(r.best.genome, seed);
    double sum = 0;
    for (int j = 0; j < 8; ++j) {
      Rng rng(derive_seed(seed, {kRandomTag, static_cast<std::uint64_t>(j)}));
      sum += retrain_f(random_genome(rng), seed);
    }
    const double mean = sum / 8;
    const bool win = best - mean >= 0.02;
    wins += win;
    os << "seed " << seed << ": searched " << fmt("%.3f", best) << " vs random mean " << fmt("%.3f", mean)
       << (win ? " (win)" : " (no)") << "; ";
    std::fprintf(stderr, "  seed %llu searched %.4f random mean %.4f\n", static_cast<unsigned long long>(seed), best,
                 mean);
  }
  os << wins << "/3 seeds with a gap >= 0.02";
  return {wins >= 2, os.str()};
}

// ---- 8: thinning ----

int components_bfs(const GrayImage& m) {
  std::vector<int> seen(m.pixels.size(), 0);
  int count = 0;
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x) || seen[static_cast<std::size_t>(y) * m.width + x]) continue;
      ++count;
      std::vector<std::pair<int, int>> stack{{y, x}};
      seen[static_cast<std::size_t>(y) * m.width + x] = 1;
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (!m.inside(ny, nx) || !m.at(ny, nx)) continue;
            int& s = seen[static_cast<std::size_t>(ny) * m.width + nx];
            if (!s) {
              s = 1;
              stack.push_back({ny, nx});
            }
          }
      }
    }
  return count;
}

Outcome criterion8() {
  int idem = 0, subset = 0, connectivity = 0, mask = 0;
  for (int i = 0; i < kCorpusSize; ++i) {
    const GrayImage fg = generate_foreground(kCorpusSeed, i, kCanvas);
    const GrayImage sk = zhang_suen_thin(fg);
    if (!(zhang_suen_thin(sk) == sk)) ++idem;
    for (std::size_t p = 0; p < sk.pixels.size(); ++p)
      if (sk.pixels[p] && !fg.pixels[p]) {
        ++subset;
        break;
      }
    if (components_bfs(sk) != components_bfs(fg)) ++connectivity;
    if (!(corpus()[static_cast<std::size_t>(i)].mask == sk)) ++mask;
  }
  const int total = idem + subset + connectivity + mask;
  return {total == 0, std::to_string(kCorpusSize) + " shapes: " + std::to_string(idem) + " idempotence, " +
                          std::to_string(subset) + " subset, " + std::to_string(connectivity) + " connectivity, " +
                          std::to_string(mask) + " mask-vs-oracle violations"};
}

// ---- 9: metrics ----

Outcome criterion9() {
  Rng rng(909);
  int reports = 0, monotone_fail = 0;
  auto check_recall = [&](const PrReport& r) {
    ++reports;
    for (std::size_t i = 1; i < r.points.size(); ++i)
      if (r.points[i].recall > r.points[i - 1].recall) {
        ++monotone_fail;
        return;
      }
  };
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 1 + rng.uniform_int(4), h = 8 + rng.uniform_int(17), w = 8 + rng.uniform_int(17);
    std::vector<Tensor<float>> scores;
    std::vector<GrayImage> targets;
    for (int i = 0; i < n; ++i) {
      Tensor<float> s({1, h, w});
      for (float& v : s.values) v = static_cast<float>(rng.uniform());
      GrayImage t(h, w);
      for (auto& p : t.pixels) p = rng.bernoulli(0.1) ? 255 : 0;
      scores.push_back(std::move(s));
      targets.push_back(std::move(t));
    }
    check_recall(pr_curve(scores, targets, default_thresholds(), rng.uniform_int(3)));
  }

  // Perfect prediction on a real mask.
  const GrayImage& m = corpus()[0].mask;
  Tensor<float> perfect({1, m.height, m.width});
  for (std::size_t i = 0; i < m.pixels.size(); ++i) perfect.values[i] = m.pixels[i] ? 1.0f : 0.0f;
  const PrReport pr = pr_curve({perfect}, {m}, default_thresholds(), 0);
  check_recall(pr);
  const bool perfect_ok = pr.best_f == 1.0;

  // A vertical line and the same line shifted one column right.
  GrayImage line(16, 16);
  Tensor<float> shifted({1, 16, 16});
  for (int y = 2; y < 14; ++y) {
    line.at(y, 7) = 255;
    shifted.values[static_cast<std::size_t>(y) * 16 + 8] = 1.0f;
  }
  const PrReport r0 = pr_curve({shifted}, {line}, default_thresholds(), 0);
  const PrReport r1 = pr_curve({shifted}, {line}, default_thresholds(), 1);
  check_recall(r0);
  check_recall(r1);
  const bool shift_ok = r0.best_f < 1.0 && r1.best_f == 1.0;

  Outcome o;
  o.pass = monotone_fail == 0 && perfect_ok && shift_ok;
  o.detail = "recall non-increasing in " + std::to_string(reports - monotone_fail) + "/" + std::to_string(reports) +
             " reports, perfect F " + fmt("%.3f", pr.best_f) + ", shifted line F " + fmt("%.3f", r0.best_f) +
             " at radius 0 and " + fmt("%.3f", r1.best_f) + " at radius 1";
  return o;
}

struct Criterion {
  int id;
  const char* title;
  double budget_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient oracle", 60, criterion1},
      {2, "LSU path-sum oracle", 60, criterion2},
      {3, "subspace dimension identity", 10, criterion3},
      {4, "encoding fidelity", 10, criterion4},
      {5, "constraint closure", 60, criterion5},
      {6, "elitism and determinism", 3 * 900, criterion6},
      {7, "searched vs random genomes", 7200, criterion7},
      {8, "thinning oracle", 30, criterion8},
      {9, "metric laws", 10, criterion9},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--only 1,2,...]\n", argv[0]);
      return 1;
    }
  }

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = seconds_since(t0);
    if (t > c.budget_s) {
      o.pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    std::printf("criterion %d [%s]: %s - %s (%.1f s)\n", c.id, c.title, o.pass ? "PASS" : "FAIL", o.detail.c_str(), t);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
