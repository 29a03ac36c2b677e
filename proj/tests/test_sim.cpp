#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "svla/sim.hpp"

using namespace svla;
using Eigen::MatrixXd;

namespace {

Eigen::Matrix<double, 7, 1> act(double x, double y, double z, double grip) {
  Eigen::Matrix<double, 7, 1> a;
  a << x, y, z, 0, 0, 0, grip;
  return a;
}

Scene two_block_scene() {
  Scene s;
  SceneObject a;
  a.id = 0; a.color = 0; a.x = 0.3; a.y = 0.6; a.size = 0.12; a.height = 0.06;
  SceneObject b;
  b.id = 1; b.color = 1; b.x = 0.7; b.y = 0.3; b.size = 0.22; b.height = 0.10;
  s.objects = {a, b};
  s.camera = make_camera(0.3, 28, 28);
  return s;
}

}  // namespace

TEST_CASE("vocabulary round trips") {
  for (int i = 0; i < vocab_size(); ++i) {
    CHECK(token_id(token_text(i)) == i);
  }
  CHECK_THROWS(token_id("banana"));
  CHECK_THROWS(token_text(-1));
  CHECK_THROWS(token_text(vocab_size()));
  CHECK(detokenize({token_id("lift"), token_id("the")}) == "lift the");
}

TEST_CASE("generate_scene respects the variation spec") {
  VariationSpec spec = base_family();
  spec.distractors = 0;
  Rng rng(7);
  Scene s = generate_scene(spec, rng);
  CHECK(s.objects.size() == 2);  // source + one stack target, no distractors

  // same rng state twice -> identical scenes
  Rng r1(123), r2(123);
  Scene s1 = generate_scene(base_family(), r1);
  Scene s2 = generate_scene(base_family(), r2);
  REQUIRE(s1.objects.size() == s2.objects.size());
  for (size_t i = 0; i < s1.objects.size(); ++i) {
    CHECK(s1.objects[i].x == s2.objects[i].x);
    CHECK(s1.objects[i].y == s2.objects[i].y);
    CHECK(s1.objects[i].size == s2.objects[i].size);
    CHECK(s1.objects[i].height == s2.objects[i].height);
    CHECK(s1.objects[i].color == s2.objects[i].color);
  }

  // heights drawn inside the requested range
  VariationSpec hspec = base_family();
  hspec.height_lo = 0.03;
  hspec.height_hi = 0.09;
  for (int seed = 0; seed < 20; ++seed) {
    Rng r(seed);
    Scene sc = generate_scene(hspec, r);
    for (const auto& o : sc.objects) {
      CHECK(o.height >= 0.03);
      CHECK(o.height <= 0.09);
    }
  }
}

TEST_CASE("generated scenes are inside bounds and non-overlapping") {
  for (int seed = 0; seed < 50; ++seed) {
    Rng r(seed);
    Scene s = generate_scene(seed % 2 ? base_family() : height_family(), r);
    CHECK(s.objects.size() == 3);
    std::set<int> colors;
    for (const auto& o : s.objects) {
      colors.insert(o.color);
      CHECK(o.x - 0.5 * o.size >= 0.0);
      CHECK(o.x + 0.5 * o.size <= 1.0);
      CHECK(o.y - 0.5 * o.size >= 0.0);
      CHECK(o.y + 0.5 * o.size <= 1.0);
      CHECK(o.height > 0.0);
      CHECK(o.bottom == 0.0);
    }
    CHECK(colors.size() == s.objects.size());
    for (size_t i = 0; i < s.objects.size(); ++i) {
      for (size_t j = i + 1; j < s.objects.size(); ++j) {
        const auto& a = s.objects[i];
        const auto& b = s.objects[j];
        const double need = 0.5 * (a.size + b.size);
        CHECK(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) > need);
      }
    }
  }
}

TEST_CASE("height family separates the two large blocks") {
  for (int seed = 0; seed < 30; ++seed) {
    Rng r(seed);
    Scene s = generate_scene(height_family(), r);
    CHECK(std::abs(s.objects[1].height - s.objects[2].height) >= 0.07);
  }
}

TEST_CASE("render: empty table gives table-plane depth everywhere") {
  Scene s;
  s.camera = make_camera(0.3, 8, 8);
  RenderResult r = render(s, 8, 8);
  CHECK(r.valid.minCoeff() == 1.0);
  for (int c = 0; c < 4; ++c) CHECK(r.rgb.planes[c].maxCoeff() == 0.0);
  // depth of the z=0 plane under the analytic camera model
  const Eigen::RowVector3d r3 = r.camera.rotation().row(2);
  const Vector3d t = r.camera.translation;
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const Vector3d p((j + 0.5) / 8.0, (i + 0.5) / 8.0, 0.0);
      CHECK(r.depth(i, j) == doctest::Approx((r3 * (p - t))(0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("render: raising an object lowers its depth by h*cos(tilt)") {
  const double tilt = 0.37;
  Scene s = two_block_scene();
  s.camera = make_camera(tilt, 28, 28);
  Scene raised = s;
  const double h = 0.13;
  raised.objects[0].bottom += h;
  RenderResult r0 = render(s, 28, 28);
  RenderResult r1 = render(raised, 28, 28);
  bool saw_pixel = false;
  for (int i = 0; i < 28; ++i) {
    for (int j = 0; j < 28; ++j) {
      const double x = (j + 0.5) / 28.0, y = (i + 0.5) / 28.0;
      if (s.objects[0].covers(x, y)) {
        saw_pixel = true;
        CHECK(r0.depth(i, j) - r1.depth(i, j) ==
              doctest::Approx(h * std::cos(tilt)).epsilon(1e-9));
      }
    }
  }
  CHECK(saw_pixel);
}

TEST_CASE("render: color change leaves depth untouched") {
  Scene s = two_block_scene();
  Scene recolored = s;
  recolored.objects[0].color = 2;
  RenderResult a = render(s, 28, 28);
  RenderResult b = render(recolored, 28, 28);
  CHECK((a.depth - b.depth).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.rgb.planes[0] - b.rgb.planes[0]).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("render: occlusion by height and one-hot color planes") {
  Scene s = two_block_scene();
  // drop the small block onto the big one
  s.objects[0].x = s.objects[1].x;
  s.objects[0].y = s.objects[1].y;
  s.objects[0].bottom = s.objects[1].height;
  s.objects[0].support = 1;
  RenderResult r = render(s, 28, 28);
  bool saw_top = false;
  for (int i = 0; i < 28; ++i) {
    for (int j = 0; j < 28; ++j) {
      const double x = (j + 0.5) / 28.0, y = (i + 0.5) / 28.0;
      CHECK(r.rgb.planes[0](i, j) + r.rgb.planes[1](i, j) +
                r.rgb.planes[2](i, j) <=
            1.0);
      if (s.objects[0].covers(x, y)) {
        saw_top = true;
        CHECK(r.rgb.planes[0](i, j) == 1.0);  // small block wins on top
        CHECK(r.rgb.planes[1](i, j) == 0.0);
      }
    }
  }
  CHECK(saw_top);
}

TEST_CASE("render: gripper fingers leave the block below visible") {
  Scene s = two_block_scene();
  GripperState g;
  g.x = s.objects[0].x;
  g.y = s.objects[0].y;
  g.z = kZTravel;
  s.gripper = g;
  RenderResult r = render(s, 28, 28);
  // some pixel of the source block still shows the block's own top depth
  const Eigen::RowVector3d r3 = r.camera.rotation().row(2);
  const Vector3d t = r.camera.translation;
  bool visible = false;
  for (int i = 0; i < 28 && !visible; ++i) {
    for (int j = 0; j < 28 && !visible; ++j) {
      const double x = (j + 0.5) / 28.0, y = (i + 0.5) / 28.0;
      if (!s.objects[0].covers(x, y)) continue;
      if (r.rgb.planes[kGripperPlane](i, j) != 0.0) continue;
      const Vector3d p(x, y, s.objects[0].top());
      if (std::abs(r.depth(i, j) - (r3 * (p - t))(0)) < 1e-12) visible = true;
    }
  }
  CHECK(visible);
  // and the fingers themselves are visible
  CHECK(r.rgb.planes[kGripperPlane].maxCoeff() == 1.0);
}

TEST_CASE("render: finger span encodes gripper height, spread encodes closure") {
  Scene s;
  s.camera = make_camera(0.3, 28, 28);
  GripperState g;
  g.x = 0.5;
  g.y = 0.5;
  g.z = 0.1;
  s.gripper = g;
  auto plane = [&](double z, bool closed) {
    Scene sc = s;
    sc.gripper->z = z;
    sc.gripper->closed = closed;
    return render(sc, 28, 28).rgb.planes[kGripperPlane];
  };
  CHECK((plane(0.1, false) - plane(0.45, false)).cwiseAbs().maxCoeff() > 0.0);
  CHECK((plane(0.3, false) - plane(0.3, true)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("unprojection lands on the generating surface") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng r(seed);
    Scene s = generate_scene(height_family(), r);
    s = with_home_gripper(s);
    RenderResult rr = render(s, 28, 28);
    auto pts = unproject_depth(rr.depth, rr.valid, rr.camera);
    for (int i = 0; i < 28; ++i) {
      for (int j = 0; j < 28; ++j) {
        const double x = (j + 0.5) / 28.0, y = (i + 0.5) / 28.0;
        CHECK(std::abs(pts[0](i, j) - x) < 1e-9);
        CHECK(std::abs(pts[1](i, j) - y) < 1e-9);
        // recovered z must be the topmost surface under this pixel
        double z_top = 0.0;
        for (const auto& o : s.objects) {
          if (o.covers(x, y)) z_top = std::max(z_top, o.top());
        }
        if (rr.rgb.planes[kGripperPlane](i, j) != 0.0) {
          z_top = std::max(z_top, s.gripper->z);
        }
        CHECK(std::abs(pts[2](i, j) - z_top) < 1e-9);
      }
    }
  }
}

TEST_CASE("depth-only distinguishability: heights invisible in rgb") {
  Scene a = two_block_scene();
  Scene b = a;
  b.objects[1].height = 0.25;
  RenderResult ra = render(a, 28, 28);
  RenderResult rb = render(b, 28, 28);
  for (int c = 0; c < 4; ++c) {
    CHECK((ra.rgb.planes[c] - rb.rgb.planes[c]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((ra.depth - rb.depth).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("step: grasp threshold semantics") {
  Scene s = with_home_gripper(two_block_scene());
  const auto& src = s.objects[0];
  const double eps = s.epsilon_pos();

  // closing just outside the tolerance grasps nothing
  Scene miss = step(s, act(src.x + eps + 1e-6, src.y, src.top(), 1));
  CHECK(miss.gripper->held == -1);

  // closing inside grasps the source
  Scene hold = step(s, act(src.x + eps - 1e-6, src.y, src.top(), 1));
  CHECK(hold.gripper->held == 0);

  // wrong height: no grasp
  Scene high = step(s, act(src.x, src.y, src.top() + kEpsZ + 1e-6, 1));
  CHECK(high.gripper->held == -1);

  // closing while already closed never grasps (edge-triggered)
  Scene closed_far = step(s, act(0.9, 0.9, 0.5, 1));
  CHECK(closed_far.gripper->held == -1);
  Scene closed_near = step(closed_far, act(src.x, src.y, src.top(), 1));
  CHECK(closed_near.gripper->held == -1);
}

TEST_CASE("step: open while holding drops onto the support below") {
  Scene s = with_home_gripper(two_block_scene());
  const auto src = s.objects[0];
  const auto tgt = s.objects[1];
  Scene hold = step(s, act(src.x, src.y, src.top(), 1));
  REQUIRE(hold.gripper->held == 0);
  Scene carry = step(hold, act(tgt.x, tgt.y, 0.5, 1));
  CHECK(carry.object(0).bottom == doctest::Approx(0.5 - src.height));
  Scene released = step(carry, act(tgt.x, tgt.y, 0.5, 0));
  CHECK(released.gripper->held == -1);
  CHECK(released.object(0).support == 1);
  CHECK(released.object(0).bottom == doctest::Approx(tgt.height));
  CHECK(released.object(0).x == doctest::Approx(tgt.x));

  // releasing over empty table lands on the table
  Scene hold2 = step(s, act(src.x, src.y, src.top(), 1));
  Scene carry2 = step(hold2, act(0.5, 0.9, 0.5, 1));
  Scene drop2 = step(carry2, act(0.5, 0.9, 0.5, 0));
  CHECK(drop2.object(0).support == -1);
  CHECK(drop2.object(0).bottom == 0.0);
}

TEST_CASE("step: determinism and clamping") {
  Scene s = with_home_gripper(two_block_scene());
  Scene a = step(s, act(0.4, 0.7, 0.2, 0));
  Scene b = step(s, act(0.4, 0.7, 0.2, 0));
  CHECK(a.gripper->x == b.gripper->x);
  CHECK(a.gripper->z == b.gripper->z);

  Scene clamped = step(s, act(-3.0, 7.0, 99.0, 0));
  CHECK(clamped.gripper->x == 0.0);
  CHECK(clamped.gripper->y == 1.0);
  CHECK(clamped.gripper->z == kZMax);

  Eigen::Matrix<double, 7, 1> bad = act(0, 0, 0, 0);
  bad[2] = std::nan("");
  CHECK_THROWS(step(s, bad));
}

TEST_CASE("success predicates") {
  Rng r(5);
  Scene s = generate_scene(base_family(), r);
  s = with_home_gripper(s);
  Rng tr(6);
  for (TaskKind k : {TaskKind::lift, TaskKind::put_on, TaskKind::stack}) {
    Task t = sample_task(s, k, tr);
    CHECK_FALSE(success(s, t));  // pre-manipulation
  }

  // stack success degrades when the placed block is nudged by 2*eps
  Task t = sample_task(s, TaskKind::stack, tr);
  Scene done = s;
  auto& src = done.object(0);
  const auto& tgt = done.object(t.target);
  src.x = tgt.x;
  src.y = tgt.y;
  src.bottom = tgt.top();
  src.support = t.target;
  CHECK(success(done, t));
  Scene nudged = done;
  nudged.object(0).x += 2.0 * done.epsilon_pos();
  CHECK_FALSE(success(nudged, t));
}

TEST_CASE("expert replay succeeds across families and task kinds") {
  int count = 0;
  for (int seed = 0; seed < 50; ++seed) {
    for (int fam = 0; fam < 2; ++fam) {
      VariationSpec spec = fam ? height_family() : base_family();
      Rng r(Rng::derive(77, "scene", seed * 2 + fam).raw());
      Scene scene = generate_scene(spec, r);
      const TaskKind kind = spec.kinds[seed % spec.kinds.size()];
      Task task = sample_task(scene, kind, r);
      Episode ep = expert_policy(scene, task, 5, 28, 28);
      CHECK(ep.success);
      CHECK(ep.actions.rows() % 5 == 0);
      CHECK(ep.observations.size() == (size_t)ep.actions.rows());
      for (int i = 0; i < ep.actions.rows(); ++i) {
        const double g = ep.actions(i, 6);
        CHECK((g == 0.0 || g == 1.0));  // binary gripper column
        CHECK(ep.actions(i, 2) >= 0.0);
        CHECK(ep.actions(i, 2) <= kZMax);
      }
      ++count;
    }
  }
  CHECK(count == 100);
}

TEST_CASE("taller source raises the expert grasp height") {
  Scene s = two_block_scene();
  Task t;
  t.kind = TaskKind::lift;
  t.instruction = {0, 3, 7, 4};
  Episode low = expert_policy(s, t, 1, 28, 28);
  Scene tall = s;
  tall.objects[0].height = 0.2;
  Episode high = expert_policy(tall, t, 1, 28, 28);
  CHECK(high.actions(1, 2) > low.actions(1, 2));
}

TEST_CASE("put_on_higher targets the taller block and omits color words") {
  Rng r(3);
  Scene s = generate_scene(height_family(), r);
  Task t = sample_task(s, TaskKind::put_on_higher, r);
  CHECK(s.object(t.target).height ==
        std::max(s.object(1).height, s.object(2).height));
  // the target is only ever described as "higher", never by its color
  const char* color_words[3] = {"red", "green", "blue"};
  const std::string target_color = color_words[s.object(t.target).color];
  for (int id : t.instruction) {
    CHECK(token_text(id) != target_color);
  }
  CHECK(detokenize(t.instruction).find("higher") != std::string::npos);
}

TEST_CASE("task chain replays to five successes") {
  for (int seed = 0; seed < 5; ++seed) {
    Rng r(Rng::derive(9, "chain", seed).raw());
    Scene scene = with_home_gripper(generate_scene(base_family(), r));
    std::vector<Task> chain = make_chain(scene, r);
    REQUIRE(chain.size() == 5);
    Scene current = scene;
    int wins = 0;
    for (const Task& t : chain) {
      Episode ep = expert_policy(current, t, 5, 28, 28);
      Scene rolled = current;
      for (int i = 0; i < ep.actions.rows(); ++i) {
        Eigen::Matrix<double, 7, 1> a = ep.actions.row(i).transpose();
        rolled = step(rolled, a);
      }
      if (success(rolled, t)) ++wins;
      // settle: open and park the gripper before the next task
      rolled = step(rolled, act(rolled.gripper->x, rolled.gripper->y,
                                rolled.gripper->z, 0));
      rolled = step(rolled, act(kHomeX, kHomeY, kZHome, 0));
      current = rolled;
    }
    CHECK(wins == 5);
  }
}

TEST_CASE("make_observation carries instruction, camera, and depth") {
  Rng r(11);
  Scene s = with_home_gripper(generate_scene(base_family(), r));
  Task t = sample_task(s, TaskKind::lift, r);
  Observation obs = make_observation(s, t, 4, 28, 28);
  obs.validate();
  CHECK(obs.timestep == 4);
  CHECK(obs.instruction == t.instruction);
  CHECK(obs.depth.has_value());
  CHECK(obs.depth_valid.has_value());
  CHECK(obs.camera.has_value());
  CHECK(obs.camera->fx == 28.0);
  CHECK_FALSE(obs.wrist_image.has_value());
}
