#include "doctest.h"
#include "directions.hpp"
#include "error.hpp"
#include "helpers.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

using namespace posi;

namespace {

std::size_t binom(std::size_t n, std::size_t k) {
    std::size_t r = 1;
    for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

std::set<std::uint64_t> admitted(const ModelUniverse& u, std::size_t p) {
    std::set<std::uint64_t> out;
    for (std::uint64_t m = 1; m <= full_mask(p); ++m)
        if (u.admits(m)) out.insert(m);
    return out;
}

}  // namespace

TEST_CASE("model ids") {
    const auto m = ModelId::parse("3, 1,4", 5);
    CHECK(m.mask == 0b1101);
    CHECK(m.to_string() == "1,3,4");
    CHECK(m.size() == 3);
    CHECK(m.members() == std::vector<std::size_t>{0, 2, 3});
    CHECK(ModelId::from_members({0, 2, 3}) == m);
    CHECK_THROWS_AS(ModelId::parse("0,1", 5), Error);
    CHECK_THROWS_AS(ModelId::parse("6", 5), Error);
    CHECK_THROWS_AS(ModelId::parse("", 5), Error);
}

TEST_CASE("model counts of the classical universes") {
    const auto x = testing_util::random_canonical(8, 4, 3);
    CHECK(enumerate_models(x, ModelUniverse::all()).size() == 15);
    CHECK(enumerate_models(x, ModelUniverse::all().forced(ModelId::parse("1", 4))).size() == 8);
    CHECK(enumerate_models(x, ModelUniverse::all().max_size(2)).size() == binom(4, 1) + binom(4, 2));
    CHECK(enumerate_models(x, ModelUniverse::all().nested()).size() == 4);
    const auto six = testing_util::random_canonical(10, 6, 4);
    // forced p' predictors: 2^{p-p'} models
    CHECK(enumerate_models(six, ModelUniverse::all().forced(ModelId::parse("2,5", 6))).size() == 16);
    // size > p - m'
    CHECK(enumerate_models(six, ModelUniverse::parse("size>p-2", 6)).size() == binom(6, 5) + binom(6, 6));
}

TEST_CASE("rank filtering drops collinear models") {
    Eigen::MatrixXd m = testing_util::random_matrix(6, 3, 8);
    m.col(2) = m.col(0) - m.col(1);
    const auto x = canonicalize(DesignMatrix(m, {}));
    // only {1,2,3} is rank deficient
    const auto models = enumerate_models(x, ModelUniverse::all());
    CHECK(models.size() == 6);
    for (const auto& id : models) CHECK(id.mask != 0b111);
    CHECK_THROWS_AS(enumerate_models(x, ModelUniverse::parse("models=1,2,3", 3)), Error);
}

TEST_CASE("universe mini-language") {
    CHECK(ModelUniverse::parse("all", 5).to_string() == "all");
    CHECK(ModelUniverse::parse("size<3", 5).to_string() == "size<=2");
    CHECK(ModelUniverse::parse("size>=2 & forced=2,1", 5).to_string() == "size>=2&forced=1,2");
    CHECK(ModelUniverse::parse("nested&size<=p-1", 5).to_string() == "size<=4&nested");
    CHECK(ModelUniverse::parse("models=2,1;3", 5).to_string() == "models=1,2;3");
    for (const char* bad : {"size<=", "bogus", "forced=9", "size<=x", "models="})
        CHECK_THROWS_AS(ModelUniverse::parse(bad, 5), Error);
}

TEST_CASE("universe spec round trip preserves the model set") {
    const std::size_t p = 6;
    const std::vector<std::string> specs = {
        "all", "size<=2", "size>p-2", "forced=1,3", "nested", "models=1,2;2,3;1,2,3,4",
        "size>=2&size<=4&forced=6", "nested&size>=3", "models=1;1,2;4,5&size<=2"};
    for (const auto& s : specs) {
        const auto u = ModelUniverse::parse(s, p);
        const auto again = ModelUniverse::parse(u.to_string(), p);
        CHECK_MESSAGE(admitted(u, p) == admitted(again, p), s);
        CHECK(again.to_string() == u.to_string());
    }
}

TEST_CASE("pruning never loses an admitted model") {
    // property: the pruned subset walk reaches exactly the admitted full-rank models
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t p = 2 + gen() % 6;
        ModelUniverse u;
        if (gen() % 2) u.max_size(1 + gen() % p);
        if (gen() % 3 == 0) u.min_size(1 + gen() % p);
        if (gen() % 3 == 0) u.forced(ModelId{gen() & full_mask(p) & 0b1011});
        if (gen() % 4 == 0) u.nested();
        if (gen() % 4 == 0) {
            std::vector<ModelId> list;
            for (int k = 0; k < 4; ++k) {
                const std::uint64_t m = gen() & full_mask(p);
                if (m) list.push_back(ModelId{m});
            }
            if (!list.empty()) u.explicit_models(list);
        }
        const auto x = testing_util::random_canonical(p + 2, p, 100 + trial);
        const auto expect = admitted(u, p);
        std::set<std::uint64_t> got;
        try {
            for (const auto& m : enumerate_models(x, u)) CHECK(got.insert(m.mask).second);
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::data);
        }
        CHECK_MESSAGE(got == expect, u.to_string());
    }
}

TEST_CASE("explicit list file") {
    const std::string path = "universe_list_test.txt";
    {
        std::ofstream f(path);
        f << "1,2\n\n3\n2,3\n";
    }
    const auto u = ModelUniverse::parse("file=" + path, 3);
    CHECK(u.to_string() == "models=1,2;3;2,3");
    std::remove(path.c_str());
    CHECK_THROWS_AS(ModelUniverse::parse("file=/nonexistent/universe", 3), Error);
}
