// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <set>

#include "oracles/brute_force.hpp"
#include "streamrecon/memory3d.hpp"
#include "support.hpp"

using sr::ErrorKind;
using sr::Matrix;
using sr::MemoryToken;
using sr::Vec3;

namespace {

Matrix planar_grid(std::size_t gh, std::size_t gw, double a) {
  Matrix pos(gh * gw, 3);
  for (std::size_t y = 0; y < gh; ++y)
    for (std::size_t x = 0; x < gw; ++x) {
      pos(y * gw + x, 0) = a * static_cast<double>(x);
      pos(y * gw + x, 1) = a * static_cast<double>(y);
      pos(y * gw + x, 2) = 2.0;
    }
  return pos;
}

MemoryToken token(std::uint64_t id, Vec3 p, double w, std::size_t c = 2) {
  MemoryToken t;
  t.key.assign(c, static_cast<double>(id));
  t.value.assign(c, -static_cast<double>(id));
  t.position = p;
  t.acc_weight = w;
  t.token_id = id;
  return t;
}

struct FrameData {
  Matrix keys, values, positions;
};

FrameData random_frame(sr::Rng& rng, std::size_t p, std::size_t c, double extent) {
  return {testing::random_matrix(rng, p, c), testing::random_matrix(rng, p, c),
          testing::random_matrix(rng, p, 3, -extent, extent)};
}

}  // namespace

TEST_CASE("patch positions") {
  SUBCASE("constant patch") {
    sr::Pointmap pm(4, 4);
    for (auto& p : pm.points) p = Vec3(1, 2, 3);
    const Matrix pos = sr::patch_positions(pm, 2, 2, 2);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(pos(r, 0) == 1.0);
      CHECK(pos(r, 1) == 2.0);
      CHECK(pos(r, 2) == 3.0);
    }
  }
  SUBCASE("confidence-weighted mean") {
    sr::Pointmap pm(2, 2);
    pm.points[0] = Vec3(0, 0, 0);
    pm.points[1] = Vec3(2, 0, 0);
    pm.confidence = {1.0, 3.0, 0.0, 0.0};
    const Matrix pos = sr::patch_positions(pm, 1, 1, 2);
    CHECK(pos(0, 0) == 1.5);
    CHECK(pos(0, 1) == 0.0);
  }
  SUBCASE("linearity") {
    sr::Rng rng(1);
    sr::Pointmap pm(8, 8), scaled(8, 8);
    for (std::size_t i = 0; i < pm.size(); ++i) {
      pm.points[i] = Vec3(rng.uniform(), rng.uniform(), rng.uniform());
      pm.confidence[i] = scaled.confidence[i] = 1.0 + rng.uniform();
      scaled.points[i] = 4.0 * pm.points[i];
    }
    const Matrix a = sr::patch_positions(pm, 2, 2, 4);
    const Matrix b = sr::patch_positions(scaled, 2, 2, 4);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.data()[i] == 4.0 * a.data()[i]);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_KIND(sr::patch_positions(sr::Pointmap(8, 8), 3, 3, 4), ErrorKind::kShape);
  }
}

TEST_CASE("image voxel size") {
  const double expected = 0.125 * (4 * 0.5 + 4 * 0.5 * std::sqrt(2.0));
  CHECK(std::abs(expected - 0.6036) < 1e-4);
  const Matrix grid = planar_grid(5, 6, 0.5);
  const double v = sr::image_voxel_size(grid, 5, 6);
  CHECK(std::abs(v - expected) <= 1e-9);

  Matrix doubled = grid;
  for (double& x : doubled.data()) x *= 2.0;
  CHECK(sr::image_voxel_size(doubled, 5, 6) == 2.0 * v);

  sr::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t gh = 3 + rng.below(5), gw = 3 + rng.below(5);
    const Matrix pos = testing::random_matrix(rng, gh * gw, 3, -5.0, 5.0);
    CHECK(std::abs(sr::image_voxel_size(pos, gh, gw) - oracle::image_voxel(pos, gh, gw)) <= 1e-12);
  }
  CHECK_THROWS_KIND(sr::image_voxel_size(planar_grid(2, 5, 1.0), 2, 5), ErrorKind::kDegenerate);
}

TEST_CASE("scene voxel is a running mean") {
  sr::MemoryBank bank;
  CHECK(bank.update_scene_voxel(1.0) == 1.0);
  CHECK(bank.update_scene_voxel(2.0) == 1.5);
  CHECK_THROWS_KIND(bank.update_scene_voxel(0.0), ErrorKind::kInvalidInput);

  sr::MemoryBank other;
  sr::Rng rng(3);
  double sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double v = rng.uniform(0.01, 2.0);
    sum += v;
    other.update_scene_voxel(v);
  }
  CHECK(std::abs(other.scene_voxel() - sum / 100.0) <= 1e-15);
}

TEST_CASE("short-term window and migration") {
  sr::MemoryBank bank({10, 3000});
  bank.update_scene_voxel(0.01);
  sr::Rng rng(4);
  for (int f = 1; f <= 10; ++f) {
    auto d = random_frame(rng, 16, 4, 10.0);
    bank.insert_frame(d.keys, d.values, d.positions, f);
  }
  CHECK(bank.long_term_size() == 0);
  CHECK(bank.short_term_size() == 160);
  CHECK(bank.snapshot().size() == 160);

  auto d = random_frame(rng, 16, 4, 10.0);
  bank.insert_frame(d.keys, d.values, d.positions, 11);
  CHECK(bank.short_term_frames() == 10);
  CHECK(bank.short_term().front().frame_index == 2);
  const auto lt = bank.long_term_tokens();
  REQUIRE(lt.size() == 16);
  for (const auto& t : lt) {
    CHECK(t.frame_index == 1);
    CHECK(t.token_id < 16);
  }
}

TEST_CASE("prune keeps the heaviest token per voxel") {
  sr::MemoryBank bank;
  bank.update_scene_voxel(1.0);
  bank.stage_long_term({token(0, Vec3(0.1, 0.1, 0.1), 0.3), token(1, Vec3(0.6, 0.2, 0.9), 0.7),
                        token(2, Vec3(1.5, 0.1, 0.1), 0.1)});
  bank.prune();
  CHECK(oracle::ids_of(bank.long_term_tokens()) == std::set<std::uint64_t>{1, 2});

  sr::MemoryBank tie;
  tie.update_scene_voxel(1.0);
  tie.stage_long_term({token(5, Vec3(0.1, 0.1, 0.1), 0.5), token(3, Vec3(0.2, 0.2, 0.2), 0.5)});
  tie.prune();
  CHECK(oracle::ids_of(tie.long_term_tokens()) == std::set<std::uint64_t>{3});

  sr::MemoryBank fresh;
  fresh.stage_long_term({token(0, Vec3::Zero(), 0.0)});
  CHECK_THROWS_KIND(fresh.prune(), ErrorKind::kInvalidConfig);
}

TEST_CASE("prune matches the group-by oracle") {
  sr::Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MemoryToken> tokens;
    for (std::uint64_t id = 0; id < 200; ++id) {
      // Coarse weights so ties actually occur.
      tokens.push_back(token(id, Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)),
                             static_cast<double>(rng.below(4)) * 0.25));
    }
    const double voxel = rng.uniform(0.3, 1.5);
    sr::MemoryBank bank;
    bank.update_scene_voxel(voxel);
    bank.stage_long_term(tokens);
    bank.prune();
    CHECK(oracle::ids_of(bank.long_term_tokens()) == oracle::prune_survivors(tokens, voxel));
    std::set<oracle::Key> keys;
    for (const auto& t : bank.long_term_tokens()) {
      CHECK(keys.insert(oracle::voxel_of(t.position, voxel)).second);
    }
  }
}

TEST_CASE("evict drops the lightest tokens") {
  sr::MemoryBank under({10, 5});
  under.update_scene_voxel(0.1);
  under.stage_long_term({token(0, Vec3(0, 0, 0), 0.1), token(1, Vec3(1, 0, 0), 0.2)});
  under.evict();
  CHECK(under.long_term_size() == 2);

  sr::MemoryBank bank({10, 2});
  bank.update_scene_voxel(0.1);
  bank.stage_long_term({token(0, Vec3(0, 0, 0), 0.1), token(1, Vec3(1, 0, 0), 0.5),
                        token(2, Vec3(2, 0, 0), 0.9)});
  bank.prune();
  bank.evict();
  CHECK(oracle::ids_of(bank.long_term_tokens()) == std::set<std::uint64_t>{1, 2});

  sr::Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t cap = 1 + rng.below(60);
    std::vector<MemoryToken> tokens;
    for (std::uint64_t id = 0; id < 100; ++id) {
      tokens.push_back(token(id, Vec3(static_cast<double>(id), 0, 0),
                             static_cast<double>(rng.below(5))));
    }
    sr::MemoryBank b({10, cap});
    b.update_scene_voxel(0.5);
    b.stage_long_term(tokens);
    b.prune();
    b.evict();
    CHECK(oracle::ids_of(b.long_term_tokens()) == oracle::evict_survivors(tokens, cap));
  }
}

TEST_CASE("snapshot ordering and attention bookkeeping") {
  sr::MemoryBank empty;
  CHECK(empty.snapshot().size() == 0);

  sr::MemoryBank bank({3, 100});
  bank.update_scene_voxel(0.05);
  sr::Rng rng(7);
  for (int f = 1; f <= 3; ++f) {
    auto d = random_frame(rng, 4, 2, 1.0);
    bank.insert_frame(d.keys, d.values, d.positions, f);
  }
  const auto s1 = bank.snapshot();
  CHECK(s1.size() == 12);
  CHECK(s1.token_ids.front() == 0);
  const auto s2 = bank.snapshot();
  CHECK(s1.token_ids == s2.token_ids);
  CHECK(s1.keys == s2.keys);

  const std::vector<std::uint64_t> ids{0, 0, 5, 999};
  const std::vector<double> w{0.25, 0.5, 1.0, 7.0};
  bank.add_attention(ids, w);
  const auto& first = bank.short_term().front().tokens;
  CHECK(first[0].acc_weight == 0.75);
  CHECK(bank.short_term()[1].tokens[1].acc_weight == 1.0);

  const std::vector<double> neg{-1.0};
  const std::vector<std::uint64_t> one{0};
  CHECK_THROWS_KIND(bank.add_attention(one, neg), ErrorKind::kInvalidInput);
}

TEST_CASE("capacity holds over a long stream") {
  sr::MemoryBank bank;
  sr::Rng rng(8);
  std::size_t max_long = 0;
  for (int f = 1; f <= 500; ++f) {
    bank.update_scene_voxel(0.05);
    auto d = random_frame(rng, 64, 4, 20.0);
    bank.insert_frame(d.keys, d.values, d.positions, f);
    // Random attention so eviction has something to rank.
    const auto snap = bank.snapshot();
    std::vector<double> w(snap.size());
    for (double& x : w) x = rng.uniform();
    bank.add_attention(snap.token_ids, w);
    REQUIRE(bank.long_term_size() <= sr::kDefaultMemoryCapacity);
    REQUIRE(bank.total_tokens() <= sr::kDefaultMemoryWindow * 64 + sr::kDefaultMemoryCapacity);
    max_long = std::max(max_long, bank.long_term_size());
  }
  CHECK(max_long == sr::kDefaultMemoryCapacity);
}
