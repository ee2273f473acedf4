#include <doctest.h>

// The OpenMP kernels must agree with the serial reference implementations;
// only summation order may differ.

#ifdef _OPENMP
#include <omp.h>
#endif

#include "svfbp/operators.hpp"
#include "test_util.hpp"

using namespace svfbp;

TEST_CASE("radon pair: parallel matches serial reference") {
    auto geom = test::small_geometry();
    auto grid = SinogramGrid::for_detector(geom);
    Rng rng(11);
    auto img = test::random_array2<double>(geom.detector_rows, geom.detector_cols, rng);
    auto s_par = radon_2d(img, grid, geom);
    auto s_ref = reference::radon_2d(img, grid, geom);
    CHECK(test::max_abs_diff(s_par, s_ref) <= 1e-12 * std::max(1.0, test::max_abs(s_ref)));

    auto sino = test::random_array2<double>(grid.num_angles, grid.num_s, rng);
    auto b_par = radon_2d_adjoint(sino, grid, geom);
    auto b_ref = reference::radon_2d_adjoint(sino, grid, geom);
    CHECK(test::max_abs_diff(b_par, b_ref) <= 1e-12 * std::max(1.0, test::max_abs(b_ref)));
}

TEST_CASE("cone projectors: parallel matches serial reference") {
    auto geom = test::small_geometry(5);
    auto traj = circular_trajectory(geom);
    Rng rng(12);
    auto vol = make_volume<double>(geom);
    for (std::size_t i = 0; i < vol.data.size(); ++i) vol.data[i] = rng.uniform(-1, 1);

    auto f_par = cone_forward(vol, traj, geom);
    auto f_ref = reference::cone_forward(vol, traj, geom);
    CHECK(test::max_abs_diff(f_par, f_ref) <= 1e-12 * std::max(1.0, test::max_abs(f_ref)));

    auto stack = test::random_array3<double>(traj.size(), geom.detector_rows, geom.detector_cols, rng);
    for (bool wbd : {false, true}) {
        auto b_par = cone_backproject(stack, traj, geom, wbd);
        auto b_ref = reference::cone_backproject(stack, traj, geom, wbd);
        CHECK(test::max_abs_diff(b_par.data, b_ref.data) <=
              1e-12 * std::max(1.0, test::max_abs(b_ref.data)));

        auto a_par = cone_backproject_adjoint(vol, traj, geom, wbd);
        auto a_ref = reference::cone_backproject_adjoint(vol, traj, geom, wbd);
        CHECK(test::max_abs_diff(a_par, a_ref) <= 1e-12 * std::max(1.0, test::max_abs(a_ref)));
    }
}

TEST_CASE("results do not depend on the OpenMP thread count") {
#ifdef _OPENMP
    auto geom = test::small_geometry(5);
    auto traj = circular_trajectory(geom);
    auto grid = SinogramGrid::for_detector(geom);
    Rng rng(13);
    auto img = test::random_array2<double>(geom.detector_rows, geom.detector_cols, rng);
    auto stack = test::random_array3<double>(traj.size(), geom.detector_rows, geom.detector_cols, rng);

    int old = omp_get_max_threads();
    omp_set_num_threads(1);
    auto s1 = radon_2d(img, grid, geom);
    auto a1 = radon_2d_adjoint(s1, grid, geom);
    auto b1 = cone_backproject(stack, traj, geom, true);
    omp_set_num_threads(old > 1 ? old : 2);
    auto s2 = radon_2d(img, grid, geom);
    auto a2 = radon_2d_adjoint(s1, grid, geom);
    auto b2 = cone_backproject(stack, traj, geom, true);
    omp_set_num_threads(old);

    CHECK(test::max_abs_diff(s1, s2) == 0.0);
    CHECK(test::max_abs_diff(a1, a2) == 0.0);
    CHECK(test::max_abs_diff(b1.data, b2.data) == 0.0);
#endif
}
