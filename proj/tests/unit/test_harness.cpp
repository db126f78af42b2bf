#include <doctest.h>

#include <cmath>

#include "manibox/error.hpp"
#include "manibox/harness.hpp"
#include "manibox/io.hpp"

using namespace manibox;
using namespace manibox::harness;

TEST_SUITE("harness") {

TEST_CASE("aggregate") {
  const auto r = aggregate(100, {50, 100, 0});
  CHECK(r.mean == 50.0);
  CHECK(r.std == doctest::Approx(std::sqrt(5000.0 / 3.0)));
  CHECK(r.per_seed.size() == 3);
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == 1.0);
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == -1.0);
  CHECK(spearman({1, 2, 3, 4, 5}, {0, 10, 10, 30, 20}) == doctest::Approx(0.8720815992723809));
  CHECK(std::isnan(spearman({1, 2, 3}, {5, 5, 5})));
}

TEST_CASE("config json") {
  const auto cfg = config_from_json_text(R"({"ranges":["5cm"],"volumes":[10,20],"seeds":[7],
    "eval_episodes":12,"policy":{"rnn_hidden":32,"epochs":3}})");
  CHECK(cfg.ranges == std::vector<std::string>{"5cm"});
  CHECK(cfg.volumes == std::vector<int>{10, 20});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
  CHECK(cfg.eval_episodes == 12);
  CHECK(cfg.policy.rnn_hidden == 32);
  CHECK(cfg.policy.epochs == 3);
  CHECK(cfg.policy.actor_hidden == 64);

  const auto back = config_from_json_text(config_to_json_text(cfg));
  CHECK(back.volumes == cfg.volumes);
  CHECK(back.policy.rnn_hidden == 32);
  CHECK(back.key_steps == cfg.key_steps);

  CHECK_THROWS_AS(config_from_json_text("{"), Error);
  CHECK_THROWS_AS(config_from_json_text(R"({"ranges":["2m"]})"), Error);
}

TEST_CASE("gen_dataset") {
  const auto d = gen_dataset(gripworld::preset_range("20cm"), 6, 3);
  CHECK(d.kept == 6);
  CHECK(d.episodes.size() == 6);
  CHECK(d.attempted >= 6);
  for (const auto& ep : d.episodes) CHECK(ep.meta.success);
  const auto again = gen_dataset(gripworld::preset_range("20cm"), 6, 3);
  CHECK(again.episodes[5].steps[40].obs == d.episodes[5].steps[40].obs);
}

TEST_CASE("select_steps") {
  const auto d = gen_dataset(gripworld::preset_range("FixPoint"), 1, 0);
  const auto& ep = d.episodes[0];
  const auto k = select_steps(ep, {0, 18, 20, 22, 70});
  REQUIRE(k.steps.size() == 5);
  CHECK(k.steps[1].action == ep.steps[18].action);
  CHECK(k.steps[4].obs == ep.steps[69].obs);
}

TEST_CASE("name_hash is stable") {
  CHECK(name_hash("") == 0xcbf29ce484222325ULL);
  CHECK(name_hash("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(name_hash("5cm") != name_hash("10cm"));
}

TEST_CASE("triangulate_cmd") {
  std::vector<geometry::Camera> cams(3);
  cams[0] = {"a", {400, 400, 320, 240, 640, 480}, geometry::look_at({1.5, 0, 0.2}, {0, 0, 0})};
  cams[1] = {"b", {400, 400, 320, 240, 640, 480}, geometry::look_at({0, 1.5, 0.2}, {0, 0, 0})};
  cams[2] = cams[0];
  cams[2].name = "a_copy";
  const geometry::Vec3 c(0.02, -0.01, 0.03);
  const auto ba = geometry::sphere_to_bbox(cams[0].intrinsics, cams[0].extrinsics, c, 0.05);
  const auto bb = geometry::sphere_to_bbox(cams[1].intrinsics, cams[1].extrinsics, c, 0.05);
  auto row = [](const std::string& id, const std::string& x, const std::string& y, const geometry::NormalizedBBox& p,
                const geometry::NormalizedBBox& q) {
    std::string s = id + "," + x + "," + y;
    for (double v : p.as_array()) s += "," + io::fmt_double(v);
    for (double v : q.as_array()) s += "," + io::fmt_double(v);
    return s + "\n";
  };
  const std::string csv = "id,cam_a,cam_b,a_u_min,a_v_min,a_u_max,a_v_max,b_u_min,b_v_min,b_u_max,b_v_max\n" +
                          row("ok", "a", "b", ba, bb) + row("masked", "a", "b", {}, bb) +
                          row("same", "a", "a_copy", ba, ba);
  const auto rows = triangulate_cmd(cams, csv);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].status == "ok");
  CHECK((rows[0].estimate->center - c).norm() < 1e-9);
  CHECK(rows[1].status == "MaskedBBox");
  CHECK(rows[2].status == "DegenerateConfiguration");
  CHECK(triangulation_csv(rows).find("masked,MaskedBBox,,,,,,,") != std::string::npos);
  CHECK_THROWS_AS(triangulate_cmd(cams, "h\nx,a,zz,0,0,0,0,0,0,0,0\n"), Error);
}

TEST_CASE("parallel_for covers every index once") {
  std::vector<int> hits(97, 0);
  parallel_for(97, 4, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
}

}  // TEST_SUITE
