#include "universe.hpp"

#include "error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace posi {
namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

long parse_integer(std::string_view text, std::string_view context) {
    text = trim(text);
    long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        fail_usage("invalid integer '" + std::string(text) + "' in " + std::string(context));
    return v;
}

// "m" or "p-k" / "p"
long parse_size_expr(std::string_view text, std::size_t p) {
    text = trim(text);
    if (!text.empty() && text.front() == 'p') {
        auto rest = trim(text.substr(1));
        if (rest.empty()) return static_cast<long>(p);
        if (rest.front() != '-') fail_usage("invalid size expression '" + std::string(text) + "'");
        return static_cast<long>(p) - parse_integer(rest.substr(1), "size expression");
    }
    return parse_integer(text, "size expression");
}

// DFS prefixes of s: {s1}, {s1,s2}, ... plus the empty set.
void insert_prefixes(std::uint64_t s, std::unordered_set<std::uint64_t>& out) {
    std::uint64_t prefix = 0;
    out.insert(prefix);
    while (s != 0) {
        const std::uint64_t low = s & (~s + 1);
        prefix |= low;
        s &= s - 1;
        out.insert(prefix);
    }
}

}  // namespace

std::vector<std::size_t> ModelId::members() const {
    std::vector<std::size_t> out;
    for (std::uint64_t m = mask; m != 0; m &= m - 1) out.push_back(static_cast<std::size_t>(std::countr_zero(m)));
    return out;
}

std::string ModelId::to_string() const {
    std::string out;
    for (auto j : members()) {
        if (!out.empty()) out += ',';
        out += std::to_string(j + 1);
    }
    return out;
}

ModelId ModelId::from_members(const std::vector<std::size_t>& zero_based) {
    ModelId m;
    for (auto j : zero_based) {
        if (j >= 64) fail_usage("column index out of range");
        m = m.with(j);
    }
    return m;
}

ModelId ModelId::parse(std::string_view text, std::size_t p) {
    ModelId m;
    for (auto part : split(text, ',')) {
        if (part.empty()) fail_usage("empty index in model '" + std::string(text) + "'");
        const long idx = parse_integer(part, "model index list");
        if (idx < 1 || static_cast<std::size_t>(idx) > p)
            fail_usage("model index " + std::to_string(idx) + " outside 1.." + std::to_string(p));
        m = m.with(static_cast<std::size_t>(idx - 1));
    }
    if (m.empty()) fail_usage("model must be nonempty");
    return m;
}

ModelUniverse& ModelUniverse::max_size(std::size_t m) {
    if (m < 1) fail_usage("maximum model size must be >= 1");
    max_size_ = max_size_ ? std::min(*max_size_, m) : m;
    return *this;
}

ModelUniverse& ModelUniverse::min_size(std::size_t m) {
    min_size_ = min_size_ ? std::max(*min_size_, m) : m;
    if (*min_size_ <= 1) min_size_.reset();
    return *this;
}

ModelUniverse& ModelUniverse::forced(ModelId f) {
    forced_ |= f.mask;
    return *this;
}

ModelUniverse& ModelUniverse::nested() {
    nested_ = true;
    return *this;
}

ModelUniverse& ModelUniverse::explicit_models(const std::vector<ModelId>& models) {
    std::vector<std::uint64_t> masks;
    for (const auto& m : models) {
        if (m.empty()) fail_usage("explicit models must be nonempty");
        masks.push_back(m.mask);
    }
    std::sort(masks.begin(), masks.end());
    masks.erase(std::unique(masks.begin(), masks.end()), masks.end());
    if (has_explicit_) {
        std::vector<std::uint64_t> both;
        std::set_intersection(explicit_.begin(), explicit_.end(), masks.begin(), masks.end(),
                              std::back_inserter(both));
        masks = std::move(both);
    }
    has_explicit_ = true;
    explicit_ = std::move(masks);
    explicit_set_ = {explicit_.begin(), explicit_.end()};
    explicit_prefixes_.clear();
    for (auto m : explicit_) {
        for (std::uint64_t rest = m; rest != 0; rest &= rest - 1) {
            const std::uint64_t bit = rest & (~rest + 1);
            insert_prefixes(m & ~bit, explicit_prefixes_);
        }
    }
    return *this;
}

bool ModelUniverse::is_all() const {
    return !max_size_ && !min_size_ && forced_ == 0 && !nested_ && !has_explicit_;
}

bool ModelUniverse::admits(std::uint64_t mask) const {
    if (mask == 0) return false;
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (max_size_ && size > *max_size_) return false;
    if (min_size_ && size < *min_size_) return false;
    if ((mask & forced_) != forced_) return false;
    if (nested_ && (mask & (mask + 1)) != 0) return false;  // must be {1..k}
    if (has_explicit_ && !explicit_set_.contains(mask)) return false;
    return true;
}

bool ModelUniverse::may_reach(std::uint64_t s) const {
    const auto size = static_cast<std::size_t>(std::popcount(s));
    const std::size_t next = s == 0 ? 0 : 64 - static_cast<std::size_t>(std::countl_zero(s));
    if (max_size_ && size + 1 > *max_size_) return false;
    if (forced_ != 0) {
        const std::uint64_t below = next >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << next) - 1;
        if (std::popcount(forced_ & below & ~s) > 1) return false;
    }
    if (nested_ && next - size > 1) return false;
    if (has_explicit_ && !explicit_prefixes_.contains(s)) return false;
    return true;
}

std::string ModelUniverse::to_string() const {
    std::vector<std::string> parts;
    if (max_size_) parts.push_back("size<=" + std::to_string(*max_size_));
    if (min_size_) parts.push_back("size>=" + std::to_string(*min_size_));
    if (forced_ != 0) parts.push_back("forced=" + ModelId{forced_}.to_string());
    if (nested_) parts.push_back("nested");
    if (has_explicit_) {
        std::string s = "models=";
        for (std::size_t i = 0; i < explicit_.size(); ++i) {
            if (i) s += ';';
            s += ModelId{explicit_[i]}.to_string();
        }
        parts.push_back(s);
    }
    if (parts.empty()) return "all";
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += '&';
        out += parts[i];
    }
    return out;
}

ModelUniverse ModelUniverse::parse(std::string_view spec, std::size_t p) {
    if (p < 1 || p > 64) fail_usage("universe requires 1 <= p <= 64");
    ModelUniverse u;
    const auto parts = split(spec, '&');
    for (auto part : parts) {
        if (part.empty()) fail_usage("empty universe term in '" + std::string(spec) + "'");
        if (part == "all") continue;
        if (part == "nested") {
            u.nested();
            continue;
        }
        if (part.starts_with("size")) {
            auto rest = trim(part.substr(4));
            long bound = 0;
            if (rest.starts_with("<=")) {
                bound = parse_size_expr(rest.substr(2), p);
                if (bound < 1) fail_usage("universe '" + std::string(part) + "' admits no model");
                u.max_size(static_cast<std::size_t>(bound));
            } else if (rest.starts_with(">=")) {
                bound = parse_size_expr(rest.substr(2), p);
                u.min_size(static_cast<std::size_t>(std::max(bound, 0L)));
            } else if (rest.starts_with("<")) {
                bound = parse_size_expr(rest.substr(1), p) - 1;
                if (bound < 1) fail_usage("universe '" + std::string(part) + "' admits no model");
                u.max_size(static_cast<std::size_t>(bound));
            } else if (rest.starts_with(">")) {
                bound = parse_size_expr(rest.substr(1), p) + 1;
                u.min_size(static_cast<std::size_t>(std::max(bound, 0L)));
            } else {
                fail_usage("invalid size constraint '" + std::string(part) + "'");
            }
            continue;
        }
        if (part.starts_with("forced=")) {
            u.forced(ModelId::parse(part.substr(7), p));
            continue;
        }
        if (part.starts_with("models=")) {
            std::vector<ModelId> models;
            for (auto m : split(part.substr(7), ';')) models.push_back(ModelId::parse(m, p));
            u.explicit_models(models);
            continue;
        }
        if (part.starts_with("file=")) {
            const std::string path(trim(part.substr(5)));
            std::ifstream in(path);
            if (!in) fail_data("cannot open universe file '" + path + "'");
            std::vector<ModelId> models;
            std::string line;
            while (std::getline(in, line)) {
                if (trim(line).empty()) continue;
                models.push_back(ModelId::parse(line, p));
            }
            if (models.empty()) fail_data("universe file '" + path + "' lists no models");
            u.explicit_models(models);
            continue;
        }
        fail_usage("unknown universe term '" + std::string(part) + "'");
    }
    return u;
}

}  // namespace posi
