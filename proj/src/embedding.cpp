#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

#include "subreg/grassmann.hpp"

namespace subreg {

namespace {

// Largest singular value; among (numerically) equal ones, the left singular
// vector that is lexicographically largest after fixing its sign so the first
// nonzero entry is positive.
Index pick_dominant(const Vector& sigma, Matrix& u, Matrix& y) {
    for (Index j = 0; j < u.cols(); ++j) {
        for (Index i = 0; i < u.rows(); ++i) {
            if (std::abs(u(i, j)) > 1e-12) {
                if (u(i, j) < 0.0) {
                    u.col(j) *= -1.0;
                    y.col(j) *= -1.0;
                }
                break;
            }
        }
    }
    const double top = sigma(0);
    Index best = 0;
    for (Index j = 1; j < sigma.size(); ++j) {
        if (sigma(j) < top * (1.0 - 1e-12)) break;
        for (Index i = 0; i < u.rows(); ++i) {
            const double d = u(i, j) - u(i, best);
            if (std::abs(d) <= 1e-12) continue;
            if (d > 0.0) best = j;
            break;
        }
    }
    return best;
}

// Unit vector orthogonal to the columns of both `a` and `b`.
Vector complement_direction(const Matrix& a, const Matrix& b) {
    const Index n = a.rows();
    Matrix span(n, a.cols() + b.cols());
    span << a, b;
    Eigen::JacobiSVD<Matrix> svd(span, Eigen::ComputeFullU);
    const Vector& s = svd.singularValues();
    Index rank = 0;
    while (rank < s.size() && s(rank) > 1e-10 * std::max(1.0, s(0))) ++rank;
    require(rank < n, "embed_curve: no orthogonal complement left to pad with");
    Vector v = svd.matrixU().col(rank);
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) v = -v;
    return v;
}

}  // namespace

GeodesicEmbedding embed_geodesic(const TangentVector& delta) {
    const Matrix& x = delta.base.matrix();
    const Index n = x.rows();
    const Index k = x.cols();
    require(k < n, "embed_geodesic: base already spans the ambient space");
    if (delta.delta.norm() == 0.0) {
        fail(ErrorKind::ZeroVelocity, "embed_geodesic: velocity is zero");
    }
    Eigen::JacobiSVD<Matrix> svd(delta.delta, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix u = svd.matrixU();
    Matrix y = svd.matrixV();
    const Vector& sigma = svd.singularValues();
    const Index i1 = pick_dominant(sigma, u, y);
    const double s1 = sigma(i1);

    Matrix w0(n, k + 1);
    w0 << x, u.col(i1);
    // u1 is orthogonal to x already; re-project to keep the base orthonormal to roundoff
    w0.col(k) -= x * (x.transpose() * w0.col(k));
    w0.col(k).normalize();

    Matrix vel = Matrix::Zero(n, k + 1);
    vel.leftCols(k) = delta.delta - s1 * u.col(i1) * y.col(i1).transpose();
    vel -= w0 * (w0.transpose() * vel);

    GeodesicEmbedding out;
    out.geodesic = TangentVector(OrthoBasis::from_orthonormal(std::move(w0)), std::move(vel));
    out.frozen_sigma = s1;
    return out;
}

EmbeddedCurve::EmbeddedCurve(std::vector<double> times, std::vector<Piece> pieces)
    : times_(std::move(times)), pieces_(std::move(pieces)) {
    require(times_.size() == pieces_.size() + 1, "EmbeddedCurve: need one more time than pieces");
}

OrthoBasis EmbeddedCurve::at(double t) const {
    require(t >= times_.front() && t <= times_.back(), "EmbeddedCurve::at: time outside the sampled range");
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t i = static_cast<std::size_t>(std::distance(times_.begin(), it));
    i = i == 0 ? 0 : i - 1;
    i = std::min(i, pieces_.size() - 1);
    return grassmann_exp(pieces_[i].geodesic, t - times_[i]);
}

std::vector<OrthoBasis> EmbeddedCurve::samples() const {
    std::vector<OrthoBasis> out;
    out.reserve(times_.size());
    for (const auto& p : pieces_) out.push_back(p.geodesic.base);
    const double last_dt = times_.back() - times_[times_.size() - 2];
    out.push_back(grassmann_exp(pieces_.back().geodesic, last_dt));
    return out;
}

EmbeddedCurve embed_curve(std::span<const OrthoBasis> samples, std::span<const double> times, Index r) {
    require(samples.size() >= 2 && samples.size() == times.size(), "embed_curve: need >= 2 timed samples");
    const Index k = samples.front().dim();
    const Index n = samples.front().ambient_dim();
    require(r > k && r <= n, "embed_curve: need k < r <= n");

    std::vector<EmbeddedCurve::Piece> pieces;
    pieces.reserve(samples.size() - 1);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        const double dt = times[i + 1] - times[i];
        require(dt > 0.0, "embed_curve: times must be strictly increasing");
        const TangentVector log = grassmann_log(samples[i], samples[i + 1]);
        TangentVector current(log.base, log.delta / dt);
        const double original_speed = current.norm();

        for (Index step = k; step < r; ++step) {
            if (current.norm() > 1e-14) {
                current = embed_geodesic(current).geodesic;
            } else {
                const Matrix& base = current.base.matrix();
                const Vector pad = complement_direction(base, current.delta);
                Matrix w(n, base.cols() + 1);
                w << base, pad;
                Matrix vel = Matrix::Zero(n, base.cols() + 1);
                vel.leftCols(base.cols()) = current.delta;
                current = TangentVector(OrthoBasis::from_orthonormal(std::move(w)), std::move(vel));
            }
        }
        pieces.push_back({std::move(current), original_speed});
    }
    return EmbeddedCurve(std::vector<double>(times.begin(), times.end()), std::move(pieces));
}

}  // namespace subreg
