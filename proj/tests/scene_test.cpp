#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "gsnav/gsnav.hpp"
#include "support/expect_error.hpp"

namespace {

using gsnav::Error;
using gsnav::ErrorCode;
using gsnav::Mat3;
using gsnav::Vec3;
using gsnav::Vec4;
using testutil::expect_error;
namespace sc = gsnav::scene;

// Chi-squared(3) quantiles computed independently (SciPy chi2.ppf).
constexpr double kQuantile02 = 1.0051740130523492;
constexpr double kQuantile05 = 2.3659738843753377;

std::string temp_path(const std::string& name) {
  return ::testing::TempDir() + name;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// Little-endian float32 payload builder for hand-crafted PLY files.
void append_f32(std::string* out, float v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out->append(buf, 4);
}

// Header + one vertex with the eleven canonical properties.
std::string minimal_ply(const std::string& format_line,
                        const std::vector<std::string>& props,
                        const std::string& payload) {
  std::string s = "ply\n" + format_line + "element vertex 1\n";
  for (const std::string& p : props) s += p;
  s += "end_header\n";
  s += payload;
  return s;
}

std::vector<std::string> canonical_props() {
  std::vector<std::string> p;
  for (const char* n : {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0",
                        "rot_1", "rot_2", "rot_3", "opacity"})
    p.push_back("property float " + std::string(n) + "\n");
  return p;
}

std::string canonical_payload() {
  std::string payload;
  for (double v : {0.0, 0.0, 0.0, 0.1, 0.1, 0.1, 1.0, 0.0, 0.0, 0.0, 5.0})
    append_f32(&payload, static_cast<float>(v));
  return payload;
}

sc::GaussianRecord plain_record(const Vec3& mu) {
  sc::GaussianRecord r;
  r.mu = mu;
  r.log_scale = Vec3(0.0, 0.0, 0.0);
  r.rot_wxyz = Vec4(1.0, 0.0, 0.0, 0.0);
  r.opacity_logit = 4.0;
  return r;
}

TEST(Chi2, CdfAndQuantileReferenceValues) {
  EXPECT_EQ(0.0, sc::chi2_cdf3(0.0));
  EXPECT_NEAR(1.0, sc::chi2_cdf3(1e6), 1e-12);
  EXPECT_EQ(0.0, sc::chi2_quantile3(0.0));
  EXPECT_NEAR(kQuantile02, sc::chi2_quantile3(0.2), 1e-9);
  EXPECT_NEAR(kQuantile05, sc::chi2_quantile3(0.5), 1e-9);
}

TEST(Chi2, QuantileInvertsCdf) {
  for (double gamma = 0.02; gamma < 0.99; gamma += 0.02) {
    const double q = sc::chi2_quantile3(gamma);
    EXPECT_NEAR(gamma, sc::chi2_cdf3(q), 1e-9) << "gamma=" << gamma;
  }
}

TEST(Chi2, QuantileStrictlyIncreasingOnGrid) {
  double prev = 0.0;
  for (int i = 1; i <= 1000; ++i) {
    const double gamma = 0.999 * i / 1000.0;
    const double q = sc::chi2_quantile3(gamma);
    EXPECT_GT(q, prev) << "gamma=" << gamma;
    prev = q;
  }
}

TEST(Chi2, QuantileDomainErrors) {
  expect_error(ErrorCode::kDomain, [] { sc::chi2_quantile3(-0.1); });
  expect_error(ErrorCode::kDomain, [] { sc::chi2_quantile3(1.0); });
  expect_error(ErrorCode::kDomain, [] { sc::chi2_quantile3(1.5); });
}

TEST(ToScene, UnitScaleAxesMatchQuantileGain) {
  std::vector<sc::GaussianRecord> recs{plain_record(Vec3(1.0, 2.0, 3.0))};
  sc::Scene s = sc::to_scene(recs);
  ASSERT_EQ(1u, s.ellipsoids.size());
  const double expected = std::sqrt(kQuantile02);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(expected, s.ellipsoids[0].semi_axes[i], 1e-9);
    EXPECT_NEAR(1.0026, s.ellipsoids[0].semi_axes[i], 1e-3);
  }
  EXPECT_TRUE(s.ellipsoids[0].mu.isApprox(Vec3(1.0, 2.0, 3.0)));
  EXPECT_EQ(1, s.source_count);
}

TEST(ToScene, UnitGainGammaLeavesScalesUntouched) {
  // The gamma whose quantile is exactly 1 makes semi_axes == exp(log_scale).
  const double gamma_unit = sc::chi2_cdf3(1.0);
  EXPECT_NEAR(0.19875, gamma_unit, 2e-5);
  sc::GaussianRecord r = plain_record(Vec3::Zero());
  r.log_scale = Vec3(std::log(2.0), std::log(0.5), std::log(3.0));
  sc::ToSceneOptions opt;
  opt.gamma = gamma_unit;
  sc::Scene s = sc::to_scene({r}, opt);
  ASSERT_EQ(1u, s.ellipsoids.size());
  EXPECT_NEAR(2.0, s.ellipsoids[0].semi_axes[0], 1e-9);
  EXPECT_NEAR(0.5, s.ellipsoids[0].semi_axes[1], 1e-9);
  EXPECT_NEAR(3.0, s.ellipsoids[0].semi_axes[2], 1e-9);
}

TEST(ToScene, DropsTransparentRecords) {
  sc::GaussianRecord faint = plain_record(Vec3(5.0, 0.0, 0.0));
  faint.opacity_logit = -10.0;  // sigmoid(-10) ~ 4.5e-5 < 0.1
  sc::Scene s = sc::to_scene({plain_record(Vec3::Zero()), faint});
  EXPECT_EQ(1u, s.ellipsoids.size());
  EXPECT_EQ(2, s.source_count);
  EXPECT_TRUE(s.rejected.empty());
  EXPECT_TRUE(s.ellipsoids[0].mu.isApprox(Vec3::Zero()));
}

TEST(ToScene, RejectsMalformedRecords) {
  sc::GaussianRecord bad_scale = plain_record(Vec3::Zero());
  bad_scale.log_scale[1] = std::numeric_limits<double>::infinity();
  sc::GaussianRecord bad_quat = plain_record(Vec3::Zero());
  bad_quat.rot_wxyz = Vec4::Zero();
  sc::Scene s =
      sc::to_scene({bad_scale, plain_record(Vec3(1.0, 1.0, 1.0)), bad_quat});
  ASSERT_EQ(1u, s.ellipsoids.size());
  ASSERT_EQ(2u, s.rejected.size());
  EXPECT_EQ(0, s.rejected[0]);
  EXPECT_EQ(2, s.rejected[1]);
}

TEST(ToScene, AllRecordsFilteredIsAnError) {
  sc::GaussianRecord faint = plain_record(Vec3::Zero());
  faint.opacity_logit = -10.0;
  expect_error(ErrorCode::kDomain, [&] { sc::to_scene({faint, faint}); });

  sc::GaussianRecord broken = plain_record(Vec3::Zero());
  broken.rot_wxyz = Vec4::Zero();
  const std::string msg =
      expect_error(ErrorCode::kDomain, [&] { sc::to_scene({broken}); });
  EXPECT_NE(std::string::npos, msg.find("rejected record indices"));
}

TEST(ToScene, GammaOutsideOpenIntervalIsAnError) {
  const std::vector<sc::GaussianRecord> recs{plain_record(Vec3::Zero())};
  sc::ToSceneOptions opt;
  opt.gamma = 0.0;
  expect_error(ErrorCode::kDomain, [&] { sc::to_scene(recs, opt); });
  opt.gamma = 1.0;
  expect_error(ErrorCode::kDomain, [&] { sc::to_scene(recs, opt); });
}

TEST(ToScene, LinearScalesSkipActivations) {
  sc::GaussianRecord r = plain_record(Vec3::Zero());
  r.log_scale = Vec3(0.5, 0.25, 0.125);  // raw semi-axis scales
  r.opacity_logit = 0.9;                 // raw opacity
  sc::ToSceneOptions opt;
  opt.linear_scales = true;
  sc::Scene s = sc::to_scene({r}, opt);
  ASSERT_EQ(1u, s.ellipsoids.size());
  const double gain = std::sqrt(kQuantile02);
  EXPECT_NEAR(gain * 0.5, s.ellipsoids[0].semi_axes[0], 1e-12);
  EXPECT_NEAR(gain * 0.25, s.ellipsoids[0].semi_axes[1], 1e-12);

  r.opacity_logit = 0.05;  // below opacity_min even without the sigmoid
  expect_error(ErrorCode::kDomain, [&] { sc::to_scene({r}, opt); });
}

TEST(Ellipsoid, ShapeMatrixSpdWithMatchingEigenvalues) {
  gsnav::rng::CounterRng rng(20240001ULL, "scene_shape");
  for (int trial = 0; trial < 200; ++trial) {
    const sc::Ellipsoid e = gsnav::synthetic::random_ellipsoid(
        rng, Vec3(-5.0, -5.0, -5.0), Vec3(5.0, 5.0, 5.0), 0.05, 3.0);
    const Mat3 m = e.shape();
    EXPECT_LT((m - m.transpose()).norm(), 1e-12 * m.norm());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
    Vec3 expected = e.semi_axes.cwiseProduct(e.semi_axes);
    std::sort(expected.data(), expected.data() + 3);
    for (int i = 0; i < 3; ++i) {
      EXPECT_GT(eig.eigenvalues()[i], 0.0);
      EXPECT_NEAR(expected[i], eig.eigenvalues()[i], 1e-9 * expected[i]);
    }
    EXPECT_LT((m * e.shape_inv() - Mat3::Identity()).norm(), 1e-9);
    // A point on the surface along a principal axis has unit Mahalanobis.
    const Vec3 tip = e.mu + e.rot.col(0) * e.semi_axes[0];
    EXPECT_NEAR(1.0, e.mahalanobis2(tip), 1e-9);
  }
}

TEST(Scene, BoundsContainSurfaceSamples) {
  gsnav::rng::CounterRng rng(20240001ULL, "scene_bounds");
  std::vector<sc::Ellipsoid> es;
  for (int i = 0; i < 20; ++i)
    es.push_back(gsnav::synthetic::random_ellipsoid(
        rng, Vec3(-4.0, -4.0, -4.0), Vec3(4.0, 4.0, 4.0), 0.1, 2.0));
  sc::Scene s = gsnav::synthetic::scene_from_ellipsoids(es);
  for (const sc::Ellipsoid& e : es) {
    for (int n = 0; n < 500; ++n) {
      Vec3 dir(rng.normal(), rng.normal(), rng.normal());
      dir.normalize();
      const Vec3 x = e.mu + e.rot * dir.cwiseProduct(e.semi_axes);
      for (int i = 0; i < 3; ++i) {
        EXPECT_GE(x[i], s.bounds_min[i] - 1e-12);
        EXPECT_LE(x[i], s.bounds_max[i] + 1e-12);
      }
    }
  }
}

TEST(Scene, EmptySceneBoundsAreZero) {
  sc::Scene s;
  s.bounds_min = Vec3(1.0, 1.0, 1.0);
  sc::recompute_bounds(s);
  EXPECT_TRUE(s.bounds_min.isZero());
  EXPECT_TRUE(s.bounds_max.isZero());
}

TEST(Ply, RoundTripPreservesRecordsAndBytes) {
  gsnav::rng::CounterRng rng(20240001ULL, "scene_ply");
  std::vector<sc::GaussianRecord> recs;
  for (int i = 0; i < 32; ++i) {
    sc::GaussianRecord r;
    // Values quantized to float32 so the round trip is lossless.
    auto f = [&](double lo, double hi) {
      return static_cast<double>(static_cast<float>(rng.uniform(lo, hi)));
    };
    r.mu = Vec3(f(-10, 10), f(-10, 10), f(-10, 10));
    r.log_scale = Vec3(f(-3, 0), f(-3, 0), f(-3, 0));
    r.rot_wxyz = Vec4(f(-1, 1), f(-1, 1), f(-1, 1), f(-1, 1));
    r.opacity_logit = f(-2, 6);
    r.color_dc = Vec3(f(0, 1), f(0, 1), f(0, 1));
    r.has_color = true;
    recs.push_back(r);
  }
  const std::string path = temp_path("round_trip.ply");
  sc::write_ply(path, recs);
  const std::vector<sc::GaussianRecord> loaded = sc::load_ply(path);
  ASSERT_EQ(recs.size(), loaded.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].mu, loaded[i].mu);
    EXPECT_EQ(recs[i].log_scale, loaded[i].log_scale);
    EXPECT_EQ(recs[i].rot_wxyz, loaded[i].rot_wxyz);
    EXPECT_EQ(recs[i].opacity_logit, loaded[i].opacity_logit);
    ASSERT_TRUE(loaded[i].has_color);
    EXPECT_EQ(recs[i].color_dc, loaded[i].color_dc);
  }
  const std::string rewritten = temp_path("round_trip_2.ply");
  sc::write_ply(rewritten, loaded);
  EXPECT_EQ(read_bytes(path), read_bytes(rewritten));
}

TEST(Ply, ColorDroppedUnlessPresentEverywhere) {
  sc::GaussianRecord with_color = plain_record(Vec3::Zero());
  with_color.color_dc = Vec3(0.25, 0.5, 0.75);
  with_color.has_color = true;
  const sc::GaussianRecord without_color = plain_record(Vec3(1.0, 0.0, 0.0));
  const std::string path = temp_path("mixed_color.ply");
  sc::write_ply(path, {with_color, without_color});
  const std::vector<sc::GaussianRecord> loaded = sc::load_ply(path);
  ASSERT_EQ(2u, loaded.size());
  EXPECT_FALSE(loaded[0].has_color);
  EXPECT_FALSE(loaded[1].has_color);
}

TEST(Ply, DecodesByNameAndSkipsExtraProperties) {
  // Canonical fields shuffled between unrelated properties of several types.
  std::string header =
      "ply\nformat binary_little_endian 1.0\n"
      "element vertex 1\n"
      "property float nx\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property uchar red\n"
      "property float scale_0\nproperty float scale_1\nproperty float scale_2\n"
      "property double weight\n"
      "property float rot_0\nproperty float rot_1\nproperty float rot_2\n"
      "property float rot_3\n"
      "property float opacity\n"
      "end_header\n";
  std::string payload;
  append_f32(&payload, 9.0f);                        // nx
  for (float v : {1.5f, 2.5f, 3.5f}) append_f32(&payload, v);  // x y z
  payload.push_back(static_cast<char>(200));         // red
  for (float v : {-1.0f, -2.0f, -3.0f}) append_f32(&payload, v);
  payload.append(8, '\0');                           // weight
  for (float v : {0.0f, 1.0f, 0.0f, 0.0f}) append_f32(&payload, v);
  append_f32(&payload, 2.0f);                        // opacity
  const std::string path = temp_path("extras.ply");
  write_bytes(path, header + payload);
  const std::vector<sc::GaussianRecord> recs = sc::load_ply(path);
  ASSERT_EQ(1u, recs.size());
  EXPECT_EQ(Vec3(1.5, 2.5, 3.5), recs[0].mu);
  EXPECT_EQ(Vec3(-1.0, -2.0, -3.0), recs[0].log_scale);
  EXPECT_EQ(Vec4(0.0, 1.0, 0.0, 0.0), recs[0].rot_wxyz);
  EXPECT_EQ(2.0, recs[0].opacity_logit);
  EXPECT_FALSE(recs[0].has_color);
}

TEST(Ply, AsciiFormatRejected) {
  const std::string path = temp_path("ascii.ply");
  write_bytes(path, minimal_ply("format ascii 1.0\n", canonical_props(),
                                "0 0 0 0 0 0 1 0 0 0 5\n"));
  const std::string msg =
      expect_error(ErrorCode::kSchema, [&] { sc::load_ply(path); });
  EXPECT_NE(std::string::npos, msg.find("unsupported format"));
}

TEST(Ply, MissingRequiredPropertyNamedInError) {
  std::vector<std::string> props = canonical_props();
  props.erase(props.begin() + 10);  // drop opacity
  const std::string path = temp_path("missing_opacity.ply");
  write_bytes(path, minimal_ply("format binary_little_endian 1.0\n", props,
                                canonical_payload().substr(0, 40)));
  const std::string msg =
      expect_error(ErrorCode::kSchema, [&] { sc::load_ply(path); });
  EXPECT_NE(std::string::npos, msg.find("opacity"));
}

TEST(Ply, NonFloatCanonicalPropertyRejected) {
  std::vector<std::string> props = canonical_props();
  props[0] = "property double x\n";
  const std::string path = temp_path("double_x.ply");
  write_bytes(path, minimal_ply("format binary_little_endian 1.0\n", props,
                                canonical_payload()));
  const std::string msg =
      expect_error(ErrorCode::kSchema, [&] { sc::load_ply(path); });
  EXPECT_NE(std::string::npos, msg.find("must be float"));
}

TEST(Ply, ListPropertyRejected) {
  std::vector<std::string> props = canonical_props();
  props.push_back("property list uchar int vertex_indices\n");
  const std::string path = temp_path("list_prop.ply");
  write_bytes(path, minimal_ply("format binary_little_endian 1.0\n", props,
                                canonical_payload()));
  expect_error(ErrorCode::kSchema, [&] { sc::load_ply(path); });
}

TEST(Ply, TruncatedPayloadIsIoError) {
  const std::string path = temp_path("truncated.ply");
  write_bytes(path, minimal_ply("format binary_little_endian 1.0\n",
                                canonical_props(),
                                canonical_payload().substr(0, 20)));
  const std::string msg =
      expect_error(ErrorCode::kIo, [&] { sc::load_ply(path); });
  EXPECT_NE(std::string::npos, msg.find("truncated"));
}

TEST(Ply, NotAPlyAndMissingFile) {
  const std::string path = temp_path("garbage.ply");
  write_bytes(path, "this is not a ply file at all\n");
  expect_error(ErrorCode::kParse, [&] { sc::load_ply(path); });
  expect_error(ErrorCode::kIo,
               [] { sc::load_ply("/nonexistent/missing_file.ply"); });
}

TEST(Ply, MalformedHeaderReportsByteOffset) {
  const std::string path = temp_path("bad_element.ply");
  write_bytes(path,
              "ply\nformat binary_little_endian 1.0\n"
              "element vertex\nend_header\n");
  const std::string msg =
      expect_error(ErrorCode::kParse, [&] { sc::load_ply(path); });
  EXPECT_NE(std::string::npos, msg.find("byte "));
}

TEST(Ply, HundredThousandRecordsParseUnderOneSecond) {
  gsnav::synthetic::ClutterParams params;
  params.count = 100000;
  const std::vector<sc::GaussianRecord> recs =
      gsnav::synthetic::clutter_records(params);
  const std::string path = temp_path("large.ply");
  sc::write_ply(path, recs);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<sc::GaussianRecord> loaded = sc::load_ply(path);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  EXPECT_EQ(100000u, loaded.size());
  EXPECT_LT(seconds, 1.0);
}

TEST(SceneJson, RoundTripPreservesEllipsoids) {
  gsnav::rng::CounterRng rng(20240001ULL, "scene_json");
  std::vector<sc::Ellipsoid> es;
  for (int i = 0; i < 8; ++i)
    es.push_back(gsnav::synthetic::random_ellipsoid(
        rng, Vec3(-2.0, -2.0, -2.0), Vec3(2.0, 2.0, 2.0), 0.1, 1.0));
  const sc::Scene s = gsnav::synthetic::scene_from_ellipsoids(es, 0.35);
  const std::string path = temp_path("scene.json");
  sc::save_scene_json(path, s);
  const sc::Scene loaded = sc::load_scene_json(path);
  ASSERT_EQ(s.ellipsoids.size(), loaded.ellipsoids.size());
  for (size_t i = 0; i < es.size(); ++i) {
    EXPECT_LT((loaded.ellipsoids[i].mu - es[i].mu).norm(), 1e-12);
    EXPECT_LT((loaded.ellipsoids[i].semi_axes - es[i].semi_axes).norm(), 1e-12);
    EXPECT_LT((loaded.ellipsoids[i].rot - es[i].rot).norm(), 1e-12);
  }
  EXPECT_LT((loaded.bounds_min - s.bounds_min).norm(), 1e-12);
  EXPECT_LT((loaded.bounds_max - s.bounds_max).norm(), 1e-12);
}

TEST(SceneJson, SchemaErrors) {
  const std::string not_array = temp_path("not_array.json");
  write_bytes(not_array, "{\"mu\": [0,0,0]}\n");
  expect_error(ErrorCode::kSchema, [&] { sc::load_scene_json(not_array); });

  const std::string bad_axes = temp_path("bad_axes.json");
  write_bytes(bad_axes,
              "[{\"mu\": [0,0,0], \"rot_quat\": [1,0,0,0],"
              " \"semi_axes\": [1,0,1]}]\n");
  expect_error(ErrorCode::kSchema, [&] { sc::load_scene_json(bad_axes); });

  const std::string missing = temp_path("missing_mu.json");
  write_bytes(missing,
              "[{\"rot_quat\": [1,0,0,0], \"semi_axes\": [1,1,1]}]\n");
  expect_error(ErrorCode::kSchema, [&] { sc::load_scene_json(missing); });
}

}  // namespace
