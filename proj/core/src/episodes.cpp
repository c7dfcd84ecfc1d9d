#include "sqpf/episodes.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "sqpf/errors.hpp"

namespace sqpf {

namespace {

// Deterministic class grouping: classes iterate in sorted order.
std::map<std::string, std::vector<const SliceSample*>> group_by_class(
    const std::vector<const SliceSample*>& pool) {
  std::map<std::string, std::vector<const SliceSample*>> groups;
  for (const SliceSample* s : pool) groups[s->class_label].push_back(s);
  return groups;
}

int distinct_cases(const std::vector<const SliceSample*>& samples) {
  std::set<std::string> cases;
  for (const SliceSample* s : samples) cases.insert(s->case_id);
  return static_cast<int>(cases.size());
}

// k samples without replacement via partial Fisher-Yates.
std::vector<const SliceSample*> draw_without_replacement(
    std::vector<const SliceSample*> candidates, int k, std::mt19937_64& rng) {
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(k);
  return candidates;
}

}  // namespace

std::vector<const SliceSample*> Episode::query_class_support() const {
  std::vector<const SliceSample*> out;
  for (const SliceSample* s : support)
    if (s->class_label == class_label) out.push_back(s);
  return out;
}

std::vector<const SliceSample*> filter_by_class(const std::vector<const SliceSample*>& pool,
                                                const std::string& class_label) {
  std::vector<const SliceSample*> out;
  for (const SliceSample* s : pool)
    if (s->class_label == class_label) out.push_back(s);
  return out;
}

Episode sample_episode(const std::vector<const SliceSample*>& pool, int n_way, int k_shot,
                       std::mt19937_64& rng) {
  if (n_way < 1 || k_shot < 1) throw DataError("sample_episode: n_way and k_shot must be >= 1");
  auto groups = group_by_class(pool);
  if (static_cast<int>(groups.size()) < n_way)
    throw DataError("sample_episode: pool has " + std::to_string(groups.size()) +
                    " classes, need " + std::to_string(n_way));

  std::vector<std::string> class_names;
  for (const auto& [name, _] : groups) class_names.push_back(name);

  // choose n_way distinct classes
  for (int i = 0; i < n_way; ++i) {
    std::uniform_int_distribution<size_t> pick(i, class_names.size() - 1);
    std::swap(class_names[i], class_names[pick(rng)]);
  }
  class_names.resize(n_way);
  std::sort(class_names.begin(), class_names.end());

  for (const auto& cls : class_names) {
    const auto& samples = groups.at(cls);
    if (static_cast<int>(samples.size()) < k_shot + 1)
      throw DataError("sample_episode: class '" + cls + "' has " +
                      std::to_string(samples.size()) + " samples, need " +
                      std::to_string(k_shot + 1));
    if (distinct_cases(samples) < 2)
      throw DataError("sample_episode: class '" + cls + "' has fewer than two distinct cases");
  }

  std::uniform_int_distribution<int> pick_class(0, n_way - 1);
  const std::string query_class = class_names[pick_class(rng)];

  // A query is feasible if every episode class retains >= k_shot samples
  // outside the query's case.
  std::vector<const SliceSample*> feasible;
  for (const SliceSample* q : groups.at(query_class)) {
    bool ok = true;
    for (const auto& cls : class_names) {
      int outside = 0;
      for (const SliceSample* s : groups.at(cls))
        if (s->case_id != q->case_id) ++outside;
      if (outside < k_shot) {
        ok = false;
        break;
      }
    }
    if (ok) feasible.push_back(q);
  }
  if (feasible.empty()) {
    // name the class that blocks every candidate query
    for (const auto& cls : class_names) {
      int best_outside = 0;
      for (const SliceSample* q : groups.at(query_class)) {
        int outside = 0;
        for (const SliceSample* s : groups.at(cls))
          if (s->case_id != q->case_id) ++outside;
        best_outside = std::max(best_outside, outside);
      }
      if (best_outside < k_shot)
        throw DataError("sample_episode: class '" + cls +
                        "' lacks samples from enough distinct cases for k_shot=" +
                        std::to_string(k_shot));
    }
    throw DataError("sample_episode: no feasible query for class '" + query_class + "'");
  }

  std::uniform_int_distribution<size_t> pick_query(0, feasible.size() - 1);
  const SliceSample* query = feasible[pick_query(rng)];

  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  ep.class_label = query_class;
  ep.query = query;
  for (const auto& cls : class_names) {
    std::vector<const SliceSample*> candidates;
    for (const SliceSample* s : groups.at(cls))
      if (s->case_id != query->case_id) candidates.push_back(s);
    auto shots = draw_without_replacement(std::move(candidates), k_shot, rng);
    ep.support.insert(ep.support.end(), shots.begin(), shots.end());
  }
  return ep;
}

Episode sample_support_query(const std::vector<const SliceSample*>& support_pool,
                             const std::vector<const SliceSample*>& query_pool, int k_shot,
                             std::mt19937_64& rng) {
  if (k_shot < 1) throw DataError("sample_support_query: k_shot must be >= 1");
  if (support_pool.empty() || query_pool.empty())
    throw DataError("sample_support_query: empty pool");
  const std::string cls = query_pool.front()->class_label;
  for (const SliceSample* s : support_pool)
    if (s->class_label != cls)
      throw DataError("sample_support_query: mixed classes in support pool");
  for (const SliceSample* s : query_pool)
    if (s->class_label != cls) throw DataError("sample_support_query: mixed classes in query pool");

  std::uniform_int_distribution<size_t> pick_query(0, query_pool.size() - 1);
  const SliceSample* query = query_pool[pick_query(rng)];
  std::vector<const SliceSample*> candidates;
  for (const SliceSample* s : support_pool)
    if (s->case_id != query->case_id) candidates.push_back(s);
  if (static_cast<int>(candidates.size()) < k_shot)
    throw DataError("sample_support_query: class '" + cls +
                    "' lacks support samples outside the query case");

  Episode ep;
  ep.n_way = 1;
  ep.k_shot = k_shot;
  ep.class_label = cls;
  ep.query = query;
  ep.support = draw_without_replacement(std::move(candidates), k_shot, rng);
  return ep;
}

}  // namespace sqpf
