#pragma once

#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace posi {

// Submodel as a column bitmask (bit j = predictor j, 0-based internally,
// 1-based when printed).
struct ModelId {
    std::uint64_t mask = 0;

    std::size_t size() const { return static_cast<std::size_t>(std::popcount(mask)); }
    bool empty() const { return mask == 0; }
    bool contains(std::size_t j) const { return j < 64 && ((mask >> j) & 1u) != 0; }
    ModelId with(std::size_t j) const { return ModelId{mask | (std::uint64_t{1} << j)}; }
    ModelId without(std::size_t j) const { return ModelId{mask & ~(std::uint64_t{1} << j)}; }

    std::vector<std::size_t> members() const;  // 0-based, ascending
    std::string to_string() const;             // "1,3,4"

    static ModelId from_members(const std::vector<std::size_t>& zero_based);
    // Parses "1,3,4" (1-based); p bounds the indices.
    static ModelId parse(std::string_view text, std::size_t p);

    auto operator<=>(const ModelId&) const = default;
};

inline std::uint64_t full_mask(std::size_t p) {
    return p >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << p) - 1;
}

// Intersection of constraints describing a family of submodels. Rank
// filtering is not part of the universe; it happens during enumeration.
class ModelUniverse {
public:
    static ModelUniverse all() { return {}; }

    ModelUniverse& max_size(std::size_t m);
    ModelUniverse& min_size(std::size_t m);
    ModelUniverse& forced(ModelId f);
    ModelUniverse& nested();
    ModelUniverse& explicit_models(const std::vector<ModelId>& models);

    // Mini-language: "all", "size<=m", "size<m", "size>=m", "size>m" (m may be
    // "p-k"), "forced=1,2", "nested", "models=1,2;2,3", "file=PATH"; parts are
    // joined with '&'.
    static ModelUniverse parse(std::string_view spec, std::size_t p);

    // Canonical spec string; parse(to_string()) yields the same model set.
    std::string to_string() const;

    bool admits(std::uint64_t mask) const;

    // False when no admitted model can be written as S' + {j} with S' an
    // extension of s by indices above max(s). Used to prune subset walks.
    bool may_reach(std::uint64_t s) const;

    std::optional<std::size_t> max_size_bound() const { return max_size_; }
    bool is_all() const;

private:
    std::optional<std::size_t> max_size_;
    std::optional<std::size_t> min_size_;
    std::uint64_t forced_ = 0;
    bool nested_ = false;
    bool has_explicit_ = false;
    std::vector<std::uint64_t> explicit_;  // sorted, unique
    std::unordered_set<std::uint64_t> explicit_set_;
    std::unordered_set<std::uint64_t> explicit_prefixes_;
};

}  // namespace posi
