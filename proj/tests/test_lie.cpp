#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <lieodom/lie.hpp>

#include "oracles.hpp"

using namespace lieodom;
using namespace lieodom::lie;

namespace {

Tangent random_tangent(oracles::Rng& rng, double max_angle, double lin_scale) {
    return Tangent(rng.ball3(max_angle), rng.vec3(lin_scale), rng.vec3(lin_scale));
}

GroupElement random_group(oracles::Rng& rng, double max_angle = 3.0, double lin_scale = 2.0) {
    return exp_se23(random_tangent(rng, max_angle, lin_scale));
}

}  // namespace

TEST_CASE("hat basics") {
    CHECK(hat(Tangent()).isZero(0.0));

    Vec9 e1 = Vec9::Zero();
    e1(0) = 1.0;
    CHECK((hat(Tangent(e1)) - generators()[0]).cwiseAbs().maxCoeff() == 0.0);

    Vec9 v;
    v << 0, 0, 1, 2, 0, 0, 0, 3, 0;
    const Mat5 m = hat(Tangent(v));
    Mat5 expected = Mat5::Zero();
    expected.block<3, 3>(0, 0) = hat3(Vec3(0, 0, 1));
    expected(0, 3) = 2.0;
    expected(1, 4) = 3.0;
    CHECK((m - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK((vee(m).vector() - v).cwiseAbs().maxCoeff() == 0.0);

    // Top-left block skew, bottom rows zero.
    CHECK((m.block<3, 3>(0, 0) + m.block<3, 3>(0, 0).transpose()).isZero(0.0));
    CHECK(m.bottomRows<2>().isZero(0.0));
}

TEST_CASE("generator basis consistency and hat linearity") {
    oracles::Rng rng(7);
    const auto g = generators();
    for (int trial = 0; trial < 50; ++trial) {
        Vec9 xi, zeta;
        for (int i = 0; i < 9; ++i) {
            xi(i) = rng.uniform(-5, 5);
            zeta(i) = rng.uniform(-5, 5);
        }
        Mat5 sum = Mat5::Zero();
        for (int i = 0; i < 9; ++i) sum += xi(i) * g[i];
        CHECK((sum - hat(Tangent(xi))).cwiseAbs().maxCoeff() == 0.0);

        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        const Mat5 lhs = hat(Tangent(Vec9(a * xi + b * zeta)));
        const Mat5 rhs = a * hat(Tangent(xi)) + b * hat(Tangent(zeta));
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("vee roundtrip and pattern rejection") {
    CHECK(vee(Mat5::Zero()).vector().isZero(0.0));

    oracles::Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec9 xi;
        for (int i = 0; i < 9; ++i) xi(i) = rng.uniform(-10, 10);
        CHECK((vee(hat(Tangent(xi))).vector() - xi).cwiseAbs().maxCoeff() == 0.0);
    }

    Mat5 bad = Mat5::Zero();
    bad(3, 0) = 1e-6;
    CHECK_THROWS_AS(vee(bad), NotInAlgebra);
    Mat5 not_skew = Mat5::Zero();
    not_skew(0, 1) = 1.0;
    not_skew(1, 0) = 1.0;
    CHECK_THROWS_AS(vee(not_skew), NotInAlgebra);
}

TEST_CASE("exp_so3 closed form vs series oracle") {
    CHECK((exp_so3(Vec3::Zero()) - Mat3::Identity()).isZero(0.0));

    Mat3 quarter_turn;
    quarter_turn << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((exp_so3(Vec3(0, 0, M_PI / 2)) - quarter_turn).cwiseAbs().maxCoeff() < 1e-12);

    oracles::Rng rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 phi = rng.ball3(3.1);
        const Mat3 r = exp_so3(phi);
        CHECK((r - oracles::series_exp<Mat3>(hat3(phi))).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(rotation_orthonormality_error(r) <= 1e-9);
        CHECK(std::abs(r.determinant() - 1.0) <= 1e-9);
    }

    // First-order expansion at small angle.
    const Vec3 phi(1e-4, -0.7e-4, 0.3e-4);
    const double err = (exp_so3(phi) - (Mat3::Identity() + hat3(phi))).norm();
    CHECK(err < 2.0 * phi.squaredNorm());
}

TEST_CASE("log_so3 roundtrip and branches") {
    CHECK(log_so3(Mat3::Identity()).isZero(0.0));

    oracles::Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vec3 phi = rng.ball3(M_PI - 0.1);
        CHECK((log_so3(exp_so3(phi)) - phi).norm() < 1e-8);
    }

    // Rotation by pi about z: angle must come back as pi.
    const Mat3 rz_pi = exp_so3(Vec3(0, 0, M_PI));
    const Vec3 l = log_so3(rz_pi);
    CHECK(std::abs(l.norm() - M_PI) < 1e-6);
    CHECK((exp_so3(l) - rz_pi).cwiseAbs().maxCoeff() < 1e-6);

    // Near-pi branch about a skewed axis.
    const Vec3 axis = Vec3(1, -2, 0.5).normalized();
    for (double delta : {1e-5, 1e-7, 0.0}) {
        const Vec3 phi = (M_PI - delta) * axis;
        const Vec3 back = log_so3(exp_so3(phi));
        CHECK((exp_so3(back) - exp_so3(phi)).cwiseAbs().maxCoeff() < 1e-6);
    }

    Mat3 shrunk = 0.9 * Mat3::Identity();
    CHECK_THROWS_AS(log_so3(shrunk), NotARotation);
}

TEST_CASE("exp_se23 matches series oracle and invariants") {
    CHECK(exp_se23(Tangent()).matrix() == GroupElement::Identity().matrix());

    // Zero rotation: columns pass through unchanged.
    const GroupElement x = exp_se23(Tangent(Vec3::Zero(), Vec3(1, 2, 3), Vec3(4, 5, 6)));
    CHECK((x.R - Mat3::Identity()).isZero(0.0));
    CHECK((x.v - Vec3(1, 2, 3)).isZero(0.0));
    CHECK((x.p - Vec3(4, 5, 6)).isZero(0.0));

    oracles::Rng rng(19);
    for (int trial = 0; trial < 300; ++trial) {
        const Tangent xi = random_tangent(rng, M_PI - 0.05, 2.0);
        const Mat5 direct = exp_se23(xi).matrix();
        const Mat5 series = oracles::series_exp<Mat5>(hat(xi), 30);
        CHECK((direct - series).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(GroupElement(direct.block<3, 3>(0, 0), direct.block<3, 1>(0, 3),
                           direct.block<3, 1>(0, 4))
                  .valid());
    }
}

TEST_CASE("log_se23 inverts exp_se23") {
    CHECK(log_se23(GroupElement::Identity()).vector().isZero(0.0));

    oracles::Rng rng(23);
    for (int trial = 0; trial < 1000; ++trial) {
        const Tangent xi = random_tangent(rng, 3.0, 3.0);
        const Tangent back = log_se23(exp_se23(xi));
        CHECK((back.vector() - xi.vector()).norm() < 1e-8);
    }

    GroupElement bad;
    bad.R *= std::cbrt(0.9);  // det 0.9
    CHECK_THROWS_AS(log_se23(bad), NotInGroup);
}

TEST_CASE("compose and inverse") {
    oracles::Rng rng(29);
    const GroupElement x = random_group(rng);
    CHECK((compose(GroupElement::Identity(), x).matrix() - x.matrix()).isZero(0.0));
    CHECK((inverse(inverse(x)).matrix() - x.matrix()).cwiseAbs().maxCoeff() < 1e-12);

    for (int trial = 0; trial < 200; ++trial) {
        const Tangent xi = random_tangent(rng, 3.0, 2.0);
        const Tangent neg(Vec3(-xi.omega), Vec3(-xi.vel), Vec3(-xi.pos));
        const Mat5 prod = compose(exp_se23(xi), exp_se23(neg)).matrix();
        CHECK((prod - Mat5::Identity()).cwiseAbs().maxCoeff() < 1e-9);

        const GroupElement a = random_group(rng);
        CHECK((compose(a, inverse(a)).matrix() - Mat5::Identity()).cwiseAbs().maxCoeff() < 1e-10);

        // compose agrees with the 5x5 matrix product.
        const GroupElement b = random_group(rng);
        CHECK((compose(a, b).matrix() - Mat5(a.matrix() * b.matrix())).cwiseAbs().maxCoeff()
              < 1e-12);
    }
}

TEST_CASE("group axioms on random triples") {
    oracles::Rng rng(31);
    for (int trial = 0; trial < 1000; ++trial) {
        const GroupElement a = random_group(rng);
        const GroupElement b = random_group(rng);
        const GroupElement c = random_group(rng);
        const Mat5 left = compose(compose(a, b), c).matrix();
        const Mat5 right = compose(a, compose(b, c)).matrix();
        CHECK((left - right).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("adjoint block structure and conjugation identity") {
    CHECK((adjoint(GroupElement::Identity()) - Mat9::Identity()).isZero(0.0));

    // Pure rotation: block-diagonal (R, R, R).
    const Mat3 r = exp_so3(Vec3(0.4, -0.2, 1.1));
    const Mat9 ad = adjoint(GroupElement(r, Vec3::Zero(), Vec3::Zero()));
    Mat9 expected = Mat9::Zero();
    expected.block<3, 3>(0, 0) = r;
    expected.block<3, 3>(3, 3) = r;
    expected.block<3, 3>(6, 6) = r;
    CHECK((ad - expected).isZero(0.0));

    oracles::Rng rng(37);
    for (int trial = 0; trial < 200; ++trial) {
        const GroupElement x = random_group(rng, 2.5, 1.5);
        const Tangent xi = random_tangent(rng, 1.0, 1.0);
        const GroupElement lhs = exp_se23(Tangent(Vec9(adjoint(x) * xi.vector())));
        const GroupElement rhs = compose(compose(x, exp_se23(xi)), inverse(x));
        CHECK((lhs.matrix() - rhs.matrix()).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("se23 left/right Jacobians match the ad series") {
    oracles::Rng rng(41);
    for (int trial = 0; trial < 200; ++trial) {
        const Tangent xi = random_tangent(rng, 2.5, 2.0);
        const Mat9 ad = ad_se23(xi);
        CHECK((left_jacobian_se23(xi) - oracles::series_left_jacobian<Mat9>(ad)).cwiseAbs()
                  .maxCoeff()
              < 1e-10);
        CHECK((right_jacobian_se23(xi) - oracles::series_left_jacobian<Mat9>(Mat9(-ad)))
                  .cwiseAbs()
                  .maxCoeff()
              < 1e-10);
    }

    // Defining property: exp(xi + d) ~ exp(xi) * exp(J_r d).
    for (int trial = 0; trial < 50; ++trial) {
        const Tangent xi = random_tangent(rng, 2.0, 1.5);
        Vec9 d;
        for (int i = 0; i < 9; ++i) d(i) = rng.uniform(-1, 1) * 1e-6;
        const Mat5 lhs = exp_se23(Tangent(Vec9(xi.vector() + d))).matrix();
        const Mat5 rhs =
            compose(exp_se23(xi), exp_se23(Tangent(Vec9(right_jacobian_se23(xi) * d)))).matrix();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("so3 jacobian pair is mutually inverse") {
    oracles::Rng rng(43);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec3 phi = rng.ball3(3.1);
        const Mat3 prod = left_jacobian_so3(phi) * left_jacobian_inv_so3(phi);
        CHECK((prod - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("from_matrix validation") {
    oracles::Rng rng(47);
    const GroupElement x = random_group(rng);
    CHECK((GroupElement::from_matrix(x.matrix()).matrix() - x.matrix()).isZero(0.0));

    Mat5 bad = x.matrix();
    bad(3, 0) = 1e-3;
    CHECK_THROWS_AS(GroupElement::from_matrix(bad), NotInGroup);
}
