#include "mpvaa/ehr/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "mpvaa/errors.hpp"
#include "mpvaa/numkit/rng.hpp"

namespace mpvaa::ehr {
namespace {

using nk::SeededRng;

constexpr std::size_t kWordsPerConcept = 4;
constexpr std::size_t kContextWidth = 2;
constexpr std::size_t kSignatureLabItems = 3;
constexpr double kBaseHfRate = 0.5;

std::string numbered(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%03zu", prefix, n);
  return buf;
}

Category background_category(std::size_t i) {
  const std::size_t r = i % 20;
  if (r < 9) return Category::diagnosis;
  if (r < 13) return Category::procedure;
  return Category::medication;
}

struct World {
  ConceptVocabulary vocab;
  std::vector<std::size_t> background;     // concept indices
  std::vector<double> background_weight;   // Zipf weights, same order
  std::vector<std::vector<std::size_t>> context_words;  // per concept
};

World build_world(const GeneratorConfig& cfg, SeededRng rng) {
  World w;
  std::size_t counters[3] = {0, 0, 0};
  auto next_code = [&](Category c) {
    const char prefix = c == Category::diagnosis ? 'D' : c == Category::procedure ? 'P' : 'M';
    return numbered(prefix, counters[static_cast<int>(c)]++);
  };
  w.vocab.add(next_code(Category::diagnosis), Category::diagnosis);  // HF, "D000"
  for (std::size_t i = 0; i < cfg.cluster_size; ++i) {
    const Category c = i % 2 == 0 ? Category::diagnosis : Category::medication;
    w.vocab.add(next_code(c), c);
  }
  for (std::size_t i = w.vocab.size(); i < cfg.vocab; ++i) {
    const Category c = background_category(i);
    w.background.push_back(w.vocab.add(next_code(c), c));
  }
  std::vector<std::size_t> rank(w.background.size());
  for (std::size_t i = 0; i < rank.size(); ++i) rank[i] = i;
  rng.shuffle(std::span<std::size_t>(rank));
  w.background_weight.resize(rank.size());
  for (std::size_t i = 0; i < rank.size(); ++i) {
    w.background_weight[i] = 1.0 / std::pow(static_cast<double>(rank[i] + 1), cfg.zipf_exponent);
  }

  std::vector<std::size_t> shared;
  for (std::size_t k = 0; k < kWordsPerConcept; ++k) shared.push_back(rng.below(cfg.word_vocab));
  w.context_words.resize(cfg.vocab);
  for (std::size_t c = 0; c < cfg.vocab; ++c) {
    if (c <= cfg.cluster_size) {
      w.context_words[c] = shared;
    } else {
      for (std::size_t k = 0; k < kWordsPerConcept; ++k) {
        w.context_words[c].push_back(rng.below(cfg.word_vocab));
      }
    }
  }
  return w;
}

// Weighted sampling without replacement of `count` background codes not in `taken`.
void sample_background(const World& w, std::size_t count, std::vector<std::size_t>& taken,
                       SeededRng& rng) {
  std::vector<double> weight = w.background_weight;
  for (std::size_t i = 0; i < w.background.size(); ++i) {
    if (std::find(taken.begin(), taken.end(), w.background[i]) != taken.end()) weight[i] = 0.0;
  }
  for (std::size_t n = 0; n < count; ++n) {
    double total = 0.0;
    for (double x : weight) total += x;
    if (total <= 0.0) return;
    double u = rng.uniform01() * total;
    std::size_t pick = weight.size() - 1;
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (weight[i] <= 0.0) continue;
      if (u < weight[i]) {
        pick = i;
        break;
      }
      u -= weight[i];
    }
    while (weight[pick] <= 0.0) --pick;
    taken.push_back(w.background[pick]);
    weight[pick] = 0.0;
  }
}

std::vector<std::size_t> make_note(const World& w, const GeneratorConfig& cfg,
                                   const std::vector<std::size_t>& concepts, SeededRng& rng) {
  std::vector<std::size_t> order = concepts;
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> tokens;
  auto context_word = [&](std::size_t c) {
    if (rng.bernoulli(0.75)) {
      const auto& words = w.context_words[c];
      return words[rng.below(words.size())];
    }
    return static_cast<std::size_t>(rng.below(cfg.word_vocab));
  };
  for (auto c : order) {
    if (!rng.bernoulli(cfg.mention_rate)) continue;
    for (std::size_t k = 0; k < kContextWidth; ++k) tokens.push_back(context_word(c));
    tokens.push_back(cfg.word_vocab + c);
    for (std::size_t k = 0; k < kContextWidth; ++k) tokens.push_back(context_word(c));
  }
  return tokens;
}

PatientRecord make_patient(const World& w, const GeneratorConfig& cfg, std::size_t number,
                           SeededRng rng) {
  PatientRecord p;
  char id[24];
  std::snprintf(id, sizeof id, "p%05zu", number);
  p.id = id;
  const std::size_t visits =
      std::min(cfg.max_visits, 2 + static_cast<std::size_t>(rng.poisson(cfg.mean_visits - 2.0)));
  const bool planted = rng.bernoulli(cfg.planted_rate);
  const double p_hf = planted ? kBaseHfRate + cfg.signal * (1.0 - kBaseHfRate)
                              : kBaseHfRate * (1.0 - cfg.signal);
  const bool hf_outcome = rng.bernoulli(p_hf);
  const bool early_hf = rng.bernoulli(cfg.early_hf_rate);
  const std::size_t early_hf_visit = rng.below(visits - 1);

  Demographics demo;
  demo.age = static_cast<AgeBin>(rng.below(4));
  demo.gender = static_cast<Gender>(rng.below(2));
  demo.weight = static_cast<WeightBin>(rng.below(3));

  for (std::size_t v = 0; v < visits; ++v) {
    const bool last = v + 1 == visits;
    Visit visit;
    const std::size_t n_codes = std::clamp<std::size_t>(
        1 + static_cast<std::size_t>(rng.poisson(cfg.mean_codes - 1.0)), 1, cfg.max_codes);
    std::vector<std::size_t> codes;
    if (last ? hf_outcome : (early_hf && v == early_hf_visit)) codes.push_back(kHfConceptIndex);
    if (planted && !last) {
      std::vector<std::size_t> cluster;
      for (std::size_t c = 1; c <= cfg.cluster_size; ++c) cluster.push_back(c);
      rng.shuffle(std::span<std::size_t>(cluster));
      const std::size_t k = cfg.cluster_size / 2 + rng.below(cfg.cluster_size / 2 + 1);
      for (std::size_t i = 0; i < k && codes.size() < n_codes; ++i) codes.push_back(cluster[i]);
    }
    if (codes.size() < n_codes) sample_background(w, n_codes - codes.size(), codes, rng);
    std::sort(codes.begin(), codes.end());
    visit.concepts = codes;

    if (rng.bernoulli(0.15)) demo.weight = static_cast<WeightBin>(rng.below(3));
    visit.demo = demo;

    std::vector<std::size_t> items;
    if (planted && !last) {
      for (std::size_t i = 0; i < kSignatureLabItems; ++i) items.push_back(i);
    }
    const std::size_t n_labs = 4 + rng.below(5);
    while (items.size() < n_labs) {
      const std::size_t item = rng.below(cfg.lab_items);
      if (std::find(items.begin(), items.end(), item) == items.end()) items.push_back(item);
    }
    std::sort(items.begin(), items.end());
    for (auto item : items) {
      std::size_t bin;
      if (planted && !last && item < kSignatureLabItems) {
        bin = cfg.lab_bins - 1;
      } else {
        const double u = rng.uniform01();
        bin = u < 0.6 ? 0 : 1 + rng.below(cfg.lab_bins - 1);
      }
      visit.labs.push_back({item, bin});
    }

    visit.note_tokens = make_note(w, cfg, visit.concepts, rng);
    p.visits.push_back(std::move(visit));
  }
  return p;
}

}  // namespace

void validate(const GeneratorConfig& cfg) {
  if (cfg.vocab < 10) throw ContractError("generator: vocabulary must have at least 10 codes");
  if (cfg.patients < 4) throw ContractError("generator: at least 4 patients are required");
  if (cfg.cluster_size < 2 || cfg.cluster_size + 4 > cfg.vocab) {
    throw ContractError("generator: cluster size must be in [2, vocab - 4]");
  }
  if (cfg.mean_visits < 2.0) throw ContractError("generator: mean visits must be >= 2");
  if (cfg.max_visits < 2) throw ContractError("generator: max visits must be >= 2");
  if (cfg.mean_codes < 1.0 || cfg.max_codes < 1) {
    throw ContractError("generator: visits need at least one code");
  }
  if (cfg.signal < 0.0 || cfg.signal > 1.0) throw ContractError("generator: signal in [0, 1]");
  if (cfg.planted_rate < 0.0 || cfg.planted_rate > 1.0 || cfg.early_hf_rate < 0.0 ||
      cfg.early_hf_rate > 1.0 || cfg.mention_rate < 0.0 || cfg.mention_rate > 1.0) {
    throw ContractError("generator: rates must lie in [0, 1]");
  }
  if (cfg.lab_items < 8 || cfg.lab_bins < 2) {
    throw ContractError("generator: need >= 8 lab items and >= 2 bins");
  }
  if (cfg.word_vocab < 1) throw ContractError("generator: word vocabulary must be non-empty");
}

Dataset generate_synthetic(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  const SeededRng root(seed);
  World world = build_world(config, root.derive(0));
  Dataset ds;
  ds.meta.lab_items = config.lab_items;
  ds.meta.lab_bins = config.lab_bins;
  ds.meta.word_vocab = config.word_vocab;
  ds.meta.hf_code = world.vocab.code(kHfConceptIndex);
  ds.patients.reserve(config.patients);
  for (std::size_t i = 0; i < config.patients; ++i) {
    // Per-patient stream: independent of generation order.
    ds.patients.push_back(make_patient(world, config, i, root.derive(1 + i)));
  }
  ds.vocab = std::move(world.vocab);
  return ds;
}

bool has_planted_cluster(const PatientRecord& record, const GeneratorConfig& config) {
  const PatientRecord window = observed_window(record);
  for (const auto& v : window.visits) {
    for (auto c : v.concepts) {
      if (c >= 1 && c <= config.cluster_size) return true;
    }
  }
  return false;
}

}  // namespace mpvaa::ehr
