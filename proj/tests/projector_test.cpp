#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pipect/projector.hpp"
#include "test_support.hpp"

using namespace pipect;

namespace {

double segment_sum(const std::vector<RaySegment>& segs) {
    double acc = 0.0;
    for (const auto& s : segs) acc += s.length;
    return acc;
}

// Length of the ray segment clipped to the grid square, computed by direct
// slab clipping (independent of the traversal).
double clipped_length(const ImageGrid& grid, const Ray& ray) {
    const double dx = ray.detector.x - ray.source.x;
    const double dy = ray.detector.y - ray.source.y;
    double t0 = 0.0, t1 = 1.0;
    const double lo = grid.x_min(), hi = grid.x_min() + grid.physical_size();
    if (dx != 0.0) {
        t0 = std::max(t0, std::min((lo - ray.source.x) / dx, (hi - ray.source.x) / dx));
        t1 = std::min(t1, std::max((lo - ray.source.x) / dx, (hi - ray.source.x) / dx));
    } else if (ray.source.x < lo || ray.source.x > hi) {
        return 0.0;
    }
    const double ylo = grid.y_max() - grid.physical_size(), yhi = grid.y_max();
    if (dy != 0.0) {
        t0 = std::max(t0, std::min((ylo - ray.source.y) / dy, (yhi - ray.source.y) / dy));
        t1 = std::min(t1, std::max((ylo - ray.source.y) / dy, (yhi - ray.source.y) / dy));
    } else if (ray.source.y < ylo || ray.source.y > yhi) {
        return 0.0;
    }
    return t0 < t1 ? (t1 - t0) * std::hypot(dx, dy) : 0.0;
}

}  // namespace

TEST_CASE("ray outside the grid intersects nothing") {
    const ImageGrid grid(8, 8.0);
    CHECK(trace_ray(grid, {{-10.0, 10.0}, {10.0, 10.0}}).empty());
    CHECK(trace_ray(grid, {{5.0, -20.0}, {5.0, 20.0}}).empty());
}

TEST_CASE("degenerate ray is rejected") {
    const ImageGrid grid(8, 8.0);
    CHECK_THROWS_AS(trace_ray(grid, {{1.0, 1.0}, {1.0, 1.0}}), ConfigError);
}

TEST_CASE("axis-aligned ray through a row crosses N pixels of length h") {
    const int n = 8;
    const ImageGrid grid(n, 4.0);
    const double h = grid.pixel_size();
    // Through the center of row 2 (y = y_max - 2.5 h), full width.
    const double y = grid.y_max() - 2.5 * h;
    const auto segs = trace_ray(grid, {{-10.0, y}, {10.0, y}});
    REQUIRE(segs.size() == static_cast<std::size_t>(n));
    for (int c = 0; c < n; ++c) {
        CHECK(segs[c].pixel == c * n + 2);
        CHECK(segs[c].length == doctest::Approx(h).epsilon(1e-12));
    }
}

TEST_CASE("diagonal across one pixel yields a single chord of length h*sqrt(2)") {
    const int n = 4;
    const ImageGrid grid(n, 4.0);
    const double h = grid.pixel_size();
    // Corner-to-corner diagonal of pixel (row 1, col 1).
    const Vec2 a{grid.x_min() + 1.0 * h, grid.y_max() - 2.0 * h};
    const Vec2 b{grid.x_min() + 2.0 * h, grid.y_max() - 1.0 * h};
    const auto segs = trace_ray(grid, {a, b});
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].pixel == 1 * n + 1);
    CHECK(segs[0].length == doctest::Approx(h * std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("segment lengths sum to the clipped ray length") {
    const ImageGrid grid(32, 55.0);
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const Ray ray{{80.0 * (rng.uniform() - 0.5), 80.0 * (rng.uniform() - 0.5)},
                      {80.0 * (rng.uniform() - 0.5), 80.0 * (rng.uniform() - 0.5)}};
        if (norm(ray.detector - ray.source) < 1e-6) continue;
        const double expected = clipped_length(grid, ray);
        const double got = segment_sum(trace_ray(grid, ray));
        CHECK(got == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("forward is linear and zero on the zero image") {
    const GeometryConfig cfg = testsupport::desk_geometry(8, 16, 16);
    const ImageGrid grid = build_image_grid(cfg);
    const ScanGeometry geom = build_scan_geometry(cfg);

    CHECK(forward(grid, geom, zero_image(grid)).values.norm() == 0.0);

    Rng rng(7);
    Image x1{grid, testsupport::random_vector(rng, grid.n())};
    Image x2{grid, testsupport::random_vector(rng, grid.n())};
    Image sum{grid, x1.values + x2.values};
    const Eigen::VectorXd lhs = forward(grid, geom, sum).values;
    const Eigen::VectorXd rhs =
        forward(grid, geom, x1).values + forward(grid, geom, x2).values;
    CHECK((lhs - rhs).norm() <= 1e-12 * rhs.norm());
}

TEST_CASE("ray through a uniform disk integrates to twice the radius") {
    const ImageGrid grid(256, 55.0);
    const double radius = 10.0, alpha = 0.07;
    Image disk = zero_image(grid);
    for (int c = 0; c < 256; ++c)
        for (int r = 0; r < 256; ++r) {
            const Vec2 p = grid.pixel_center(r, c);
            if (norm(p) < radius) disk.values[c * 256 + r] = alpha;
        }
    const auto segs = trace_ray(grid, {{-40.0, 0.0}, {40.0, 0.0}});
    double integral = 0.0;
    for (const auto& s : segs) integral += s.length * disk.values[s.pixel];
    CHECK(std::abs(integral - 2.0 * radius * alpha) <= 2.0 * grid.pixel_size() * alpha);
}

TEST_CASE("adjoint of a one-hot sinogram scatters one traced row") {
    const GeometryConfig cfg = testsupport::desk_geometry(6, 9, 12);
    const ImageGrid grid = build_image_grid(cfg);
    const ScanGeometry geom = build_scan_geometry(cfg);

    Sinogram one_hot{geom, Eigen::VectorXd::Zero(geom.m())};
    const int angle = 2, det = 5;
    one_hot.values[angle * geom.n_detectors + det] = 1.0;

    const Image back = adjoint(grid, geom, one_hot);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(grid.n());
    for (const auto& s : trace_ray(grid, ray_for(geom, angle, det)))
        expected[s.pixel] = s.length;
    CHECK((back.values - expected).norm() == 0.0);

    CHECK(adjoint(grid, geom, Sinogram{geom, Eigen::VectorXd::Zero(geom.m())})
              .values.norm() == 0.0);
}

TEST_CASE("forward and adjoint satisfy the inner-product identity") {
    const GeometryConfig cfg = testsupport::desk_geometry(12, 24, 32);
    const ImageGrid grid = build_image_grid(cfg);
    const ScanGeometry geom = build_scan_geometry(cfg);

    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const Image x{grid, testsupport::random_vector(rng, grid.n())};
        const Sinogram y{geom, testsupport::random_vector(rng, geom.m())};
        const Eigen::VectorXd ax = forward(grid, geom, x).values;
        const Eigen::VectorXd aty = adjoint(grid, geom, y).values;
        const double lhs = ax.dot(y.values);
        const double rhs = x.values.dot(aty);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * ax.norm() * y.values.norm());
    }
}

TEST_CASE("dense materialization matches forward and adjoint") {
    const GeometryConfig cfg = testsupport::desk_geometry(10, 18, 24);
    const ImageGrid grid = build_image_grid(cfg);
    const ScanGeometry geom = build_scan_geometry(cfg);

    // Row-by-row dense assembly from traced rays.
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(geom.m(), grid.n());
    std::int64_t i = 0;
    for (int a = 0; a < geom.n_angles; ++a)
        for (int d = 0; d < geom.n_detectors; ++d, ++i)
            for (const auto& s : trace_ray(grid, ray_for(geom, a, d)))
                dense(i, s.pixel) = s.length;

    Rng rng(3);
    const Image x{grid, testsupport::random_vector(rng, grid.n())};
    const Sinogram y{geom, testsupport::random_vector(rng, geom.m())};

    const Eigen::VectorXd ax = forward(grid, geom, x).values;
    CHECK((ax - dense * x.values).norm() <= 1e-12 * ax.norm());
    const Eigen::VectorXd aty = adjoint(grid, geom, y).values;
    CHECK((aty - dense.transpose() * y.values).norm() <= 1e-12 * aty.norm());
}

TEST_CASE("cached system matrix reproduces the on-the-fly projector") {
    const GeometryConfig cfg = testsupport::desk_geometry(14, 20, 20);
    const ImageGrid grid = build_image_grid(cfg);
    const ScanGeometry geom = build_scan_geometry(cfg);
    const SystemMatrix cached(grid, geom);
    CHECK(cached.rows() == geom.m());
    CHECK(cached.cols() == grid.n());
    CHECK(cached.nnz() > 0);

    Rng rng(5);
    const Image x{grid, testsupport::random_vector(rng, grid.n())};
    const Sinogram y{geom, testsupport::random_vector(rng, geom.m())};

    Eigen::VectorXd ax_cached(geom.m()), aty_cached(grid.n());
    cached.apply(x.values, ax_cached);
    cached.apply_transpose(y.values, aty_cached);
    CHECK((ax_cached - forward(grid, geom, x).values).norm() == 0.0);
    CHECK((aty_cached - adjoint(grid, geom, y).values).norm() == 0.0);
}

TEST_CASE("grid and geometry mismatches are reported") {
    const GeometryConfig cfg = testsupport::desk_geometry(4, 8, 8);
    const ImageGrid grid = build_image_grid(cfg);
    const ImageGrid other(9, 55.0);
    const ScanGeometry geom = build_scan_geometry(cfg);

    CHECK_THROWS_AS(forward(grid, geom, zero_image(other)), DimensionError);

    GeometryConfig cfg2 = cfg;
    cfg2.n_angles = 5;
    const ScanGeometry geom2 = build_scan_geometry(cfg2);
    CHECK_THROWS_AS(
        adjoint(grid, geom, Sinogram{geom2, Eigen::VectorXd::Zero(geom2.m())}),
        DimensionError);
}
