#pragma once

// Parameter partitions: exact, disjoint, covering assignments of parameter
// coordinates to blocks. The Transformer strategy follows the role rules
// (embed/output by vocabulary row, query/key by head, value/attn.proj/mlp by
// output neuron, everything else whole); the per-tensor strategy is the
// framework-default grouping; the singleton strategy gives one block per
// scalar and exists so block-shared updates can be tested against their
// per-coordinate counterparts exactly.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace miniopt::partition {

enum class Role { Embed, Output, Query, Key, Value, AttnProj, Mlp, Other };

inline const char* role_name(Role r) {
  switch (r) {
    case Role::Embed: return "embed";
    case Role::Output: return "output";
    case Role::Query: return "query";
    case Role::Key: return "key";
    case Role::Value: return "value";
    case Role::AttnProj: return "attn.proj";
    case Role::Mlp: return "mlp";
    case Role::Other: return "other";
  }
  return "other";
}

// Name-substring fallback for imported configs whose tensors carry no
// declared role. Matches the usual naming conventions ("embed", "query",
// ...); declared roles always win over this.
inline Role role_from_name(const std::string& name) {
  const auto has = [&](const char* s) { return name.find(s) != std::string::npos; };
  if (has("embed") || has("wte") || has("wpe")) return Role::Embed;
  if (has("output") || has("lm_head")) return Role::Output;
  if (has("query") || has("wq")) return Role::Query;
  if (has("key") || has("wk")) return Role::Key;
  if (has("value") || has("wv")) return Role::Value;
  if (has("attn.proj") || has("wo")) return Role::AttnProj;
  if (has("mlp")) return Role::Mlp;
  return Role::Other;
}

struct ParamMeta {
  std::string name;
  std::int64_t rows = 0;  // leading dimension; length for 1-D tensors
  std::int64_t cols = 1;  // 1 for 1-D tensors
  Role role = Role::Other;
  std::int64_t n_heads = 0;  // required (> 0) for Query/Key

  std::int64_t size() const { return rows * cols; }
};

// Half-open range of flattened coordinates within one named tensor. The
// named strategies always produce row-aligned ranges (begin/end divisible by
// cols); the singleton strategy views tensors as flat, one scalar per block.
struct BlockRef {
  std::int64_t id = 0;
  std::string param;
  std::int64_t begin = 0;
  std::int64_t end = 0;
};

enum class Strategy { PerTensor, Transformer, Singleton, Custom };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PerTensor: return "per_tensor";
    case Strategy::Transformer: return "transformer";
    case Strategy::Singleton: return "singleton";
    case Strategy::Custom: return "custom";
  }
  return "custom";
}

struct PartitionSpec {
  Strategy strategy = Strategy::Custom;
  std::vector<BlockRef> blocks;

  std::int64_t block_count() const { return static_cast<std::int64_t>(blocks.size()); }
};

namespace detail {

inline void check_params(const std::vector<ParamMeta>& params) {
  std::map<std::string, int> seen;
  for (const auto& p : params) {
    if (p.name.empty()) throw std::invalid_argument("partition: unnamed tensor");
    if (p.rows <= 0 || p.cols <= 0) {
      throw std::invalid_argument("partition: tensor '" + p.name + "' has empty shape");
    }
    if (++seen[p.name] > 1) {
      throw std::invalid_argument("partition: duplicate tensor name '" + p.name + "'");
    }
  }
}

}  // namespace detail

// One whole block per tensor (the framework-default grouping).
inline PartitionSpec partition_per_tensor(const std::vector<ParamMeta>& params) {
  if (params.empty()) throw std::invalid_argument("partition_per_tensor: empty parameter list");
  detail::check_params(params);
  PartitionSpec spec;
  spec.strategy = Strategy::PerTensor;
  std::int64_t id = 0;
  for (const auto& p : params) {
    spec.blocks.push_back({id++, p.name, 0, p.size()});
  }
  return spec;
}

// Role-driven Transformer partition. value_as_whole switches Value tensors
// from one-block-per-output-neuron to a single whole block.
inline PartitionSpec partition_transformer(const std::vector<ParamMeta>& params,
                                           bool value_as_whole = false) {
  if (params.empty()) throw std::invalid_argument("partition_transformer: empty parameter list");
  detail::check_params(params);
  PartitionSpec spec;
  spec.strategy = Strategy::Transformer;
  std::int64_t id = 0;
  const auto push = [&](const ParamMeta& p, std::int64_t row_begin, std::int64_t row_end) {
    spec.blocks.push_back({id++, p.name, row_begin * p.cols, row_end * p.cols});
  };
  for (const auto& p : params) {
    switch (p.role) {
      case Role::Embed:
      case Role::Output:
        // one block per vocabulary row (token)
        for (std::int64_t r = 0; r < p.rows; ++r) push(p, r, r + 1);
        break;
      case Role::Query:
      case Role::Key: {
        if (p.n_heads <= 0) {
          throw std::invalid_argument("partition_transformer: tensor '" + p.name +
                                      "' needs head metadata");
        }
        if (p.rows % p.n_heads != 0) {
          throw std::invalid_argument("partition_transformer: tensor '" + p.name +
                                      "' rows not divisible by n_heads");
        }
        const std::int64_t rows_per_head = p.rows / p.n_heads;
        for (std::int64_t h = 0; h < p.n_heads; ++h) {
          push(p, h * rows_per_head, (h + 1) * rows_per_head);
        }
        break;
      }
      case Role::Value:
        if (value_as_whole) {
          push(p, 0, p.rows);
          break;
        }
        [[fallthrough]];
      case Role::AttnProj:
      case Role::Mlp:
        // one block per output neuron (row)
        for (std::int64_t r = 0; r < p.rows; ++r) push(p, r, r + 1);
        break;
      case Role::Other:
        push(p, 0, p.rows);
        break;
    }
  }
  return spec;
}

// One block per scalar coordinate.
inline PartitionSpec partition_singleton(const std::vector<ParamMeta>& params) {
  detail::check_params(params);
  PartitionSpec spec;
  spec.strategy = Strategy::Singleton;
  std::int64_t id = 0;
  for (const auto& p : params) {
    for (std::int64_t k = 0; k < p.size(); ++k) {
      spec.blocks.push_back({id++, p.name, k, k + 1});
    }
  }
  return spec;
}

struct ValidationResult {
  bool ok = true;
  std::string message;
};

// Confirms disjointness and coverage; on failure reports the first
// violating coordinate instead of throwing.
inline ValidationResult validate(const PartitionSpec& spec,
                                 const std::vector<ParamMeta>& params) {
  std::map<std::string, std::vector<std::uint8_t>> cover;
  for (const auto& p : params) {
    if (cover.count(p.name)) return {false, "duplicate tensor name '" + p.name + "'"};
    cover[p.name].assign(static_cast<std::size_t>(p.size()), 0);
  }
  for (const auto& b : spec.blocks) {
    auto it = cover.find(b.param);
    if (it == cover.end()) return {false, "block " + std::to_string(b.id) + " references unknown tensor '" + b.param + "'"};
    if (b.begin < 0 || b.end > static_cast<std::int64_t>(it->second.size()) || b.begin >= b.end) {
      return {false, "block " + std::to_string(b.id) + " has invalid range on '" + b.param + "'"};
    }
    for (std::int64_t k = b.begin; k < b.end; ++k) {
      if (it->second[static_cast<std::size_t>(k)]++) {
        return {false, "coordinate " + std::to_string(k) + " of '" + b.param +
                           "' assigned to more than one block"};
      }
    }
  }
  for (const auto& [name, flags] : cover) {
    for (std::size_t k = 0; k < flags.size(); ++k) {
      if (!flags[k]) {
        return {false, "coordinate " + std::to_string(k) + " of '" + name +
                           "' is not covered by any block"};
      }
    }
  }
  return {true, ""};
}

// Per-tensor block counts, keyed by tensor name.
inline std::map<std::string, std::int64_t> block_counts(const PartitionSpec& spec) {
  std::map<std::string, std::int64_t> counts;
  for (const auto& b : spec.blocks) ++counts[b.param];
  return counts;
}

// Flat parameter layout: tensors enumerated in list order, concatenated.
struct ParamLayout {
  std::vector<ParamMeta> metas;
  std::vector<std::int64_t> offsets;  // per tensor, into the flat vector
  std::int64_t total = 0;

  explicit ParamLayout(std::vector<ParamMeta> ms) : metas(std::move(ms)) {
    detail::check_params(metas);
    offsets.reserve(metas.size());
    for (const auto& m : metas) {
      offsets.push_back(total);
      total += m.size();
    }
  }

  std::int64_t offset_of(const std::string& name) const {
    for (std::size_t i = 0; i < metas.size(); ++i) {
      if (metas[i].name == name) return offsets[i];
    }
    throw std::invalid_argument("ParamLayout: unknown tensor '" + name + "'");
  }
};

// Blocks as half-open ranges into the layout's flat parameter vector, in
// block-id order. Every block is contiguous because blocks never span
// tensors and tensors are laid out contiguously.
inline std::vector<std::pair<std::int64_t, std::int64_t>> global_block_ranges(
    const PartitionSpec& spec, const ParamLayout& layout) {
  std::map<std::string, std::int64_t> offset;
  for (std::size_t i = 0; i < layout.metas.size(); ++i) {
    offset[layout.metas[i].name] = layout.offsets[i];
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  ranges.reserve(spec.blocks.size());
  for (const auto& b : spec.blocks) {
    auto it = offset.find(b.param);
    if (it == offset.end()) {
      throw std::invalid_argument("global_block_ranges: unknown tensor '" + b.param + "'");
    }
    ranges.emplace_back(it->second + b.begin, it->second + b.end);
  }
  return ranges;
}

// JSON schema: {"strategy": str, "blocks": [{"id", "param", "row_start",
// "row_end"}]}. Row units are leading-dimension rows for row-aligned specs;
// the singleton strategy serializes flattened indices (one scalar per row).
inline nlohmann::json to_json(const PartitionSpec& spec, const std::vector<ParamMeta>& params) {
  std::map<std::string, std::int64_t> cols;
  for (const auto& p : params) cols[p.name] = p.cols;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : spec.blocks) {
    auto it = cols.find(b.param);
    if (it == cols.end()) throw std::invalid_argument("to_json: unknown tensor '" + b.param + "'");
    std::int64_t unit = it->second;
    if (spec.strategy == Strategy::Singleton || b.begin % unit != 0 || b.end % unit != 0) {
      unit = 1;
    }
    blocks.push_back({{"id", b.id},
                      {"param", b.param},
                      {"row_start", b.begin / unit},
                      {"row_end", b.end / unit}});
  }
  return {{"strategy", strategy_name(spec.strategy)}, {"blocks", std::move(blocks)}};
}

}  // namespace miniopt::partition
