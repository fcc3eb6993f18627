#include "wmest/asymptotics.hpp"

#include "wmest/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace wmest {

namespace {

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Scores psi(X_ij, a) of one cluster as the columns of a d x m_i matrix.
Matrix cluster_scores(const Matrix& cluster, const EstimatorFamily& fam, const Eigen::Ref<const Point>& a) {
    Matrix scores(cluster.rows(), cluster.cols());
    for (Eigen::Index j = 0; j < cluster.cols(); ++j) scores.col(j) = psi_eval(fam, cluster.col(j), a);
    return scores;
}

Matrix outer_sum(const Matrix& scores) {
    Matrix out = Matrix::Zero(scores.rows(), scores.rows());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) out.noalias() += scores.col(j) * scores.col(j).transpose();
    return out;
}

Matrix cross_sum(const Matrix& scores) {
    Matrix out = Matrix::Zero(scores.rows(), scores.rows());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        for (Eigen::Index jp = 0; jp < scores.cols(); ++jp) {
            if (jp != j) out.noalias() += scores.col(jp) * scores.col(j).transpose();
        }
    }
    return symmetrized(out);
}

Matrix jacobian_sum(const Matrix& cluster, const EstimatorFamily& fam, const Eigen::Ref<const Point>& a,
                    std::size_t* nonsmooth) {
    Matrix out = Matrix::Zero(cluster.rows(), cluster.rows());
    for (Eigen::Index j = 0; j < cluster.cols(); ++j) {
        const JacobianValue jv = psi_jacobian(fam, cluster.col(j), a);
        out += jv.value;
        if (nonsmooth && jv.on_nonsmooth_locus) ++*nonsmooth;
    }
    return out;
}

void check_point(const ClusteredSample& sample, const Eigen::Ref<const Point>& a) {
    if (a.size() != sample.dim()) {
        std::ostringstream os;
        os << "dimension mismatch: sample has dimension " << sample.dim() << ", evaluation point has " << a.size();
        throw InputError(os.str());
    }
}

std::string format_point(const Point& a) {
    std::ostringstream os;
    os << '(';
    for (Eigen::Index k = 0; k < a.size(); ++k) os << (k ? ", " : "") << a(k);
    os << ')';
    return os.str();
}

}  // namespace

Matrix b_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a) {
    check_point(sample, a);
    w.check_compatible(sample);
    const auto& wc = w.cluster_weights();
    Matrix out = Matrix::Zero(sample.dim(), sample.dim());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        out += wc[i] * wc[i] * outer_sum(cluster_scores(sample.cluster(i), fam, a));
    }
    return out / static_cast<double>(sample.total());
}

Matrix c_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a) {
    check_point(sample, a);
    w.check_compatible(sample);
    const auto& wc = w.cluster_weights();
    Matrix out = Matrix::Zero(sample.dim(), sample.dim());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        out += wc[i] * wc[i] * cross_sum(cluster_scores(sample.cluster(i), fam, a));
    }
    return out / static_cast<double>(sample.total());
}

Matrix v_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
             const Eigen::Ref<const Point>& a) {
    check_point(sample, a);
    w.check_compatible(sample);
    const auto& wc = w.cluster_weights();
    Matrix out = Matrix::Zero(sample.dim(), sample.dim());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        out += wc[i] * jacobian_sum(sample.cluster(i), fam, a, nullptr);
    }
    return out / static_cast<double>(sample.total());
}

CovarianceReport assemble_sandwich(Matrix B, Matrix C, Matrix V, Point eval_point, std::string family) {
    CovarianceReport rep;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(V));
    const Eigen::VectorXd ev = es.eigenvalues();
    const double lo = ev.cwiseAbs().minCoeff();
    const double hi = ev.cwiseAbs().maxCoeff();
    rep.condition_V = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!std::isfinite(rep.condition_V) || rep.condition_V >= kMaxConditionV) {
        std::ostringstream os;
        os << "singular V_hat for estimator " << family << " at evaluation point " << format_point(eval_point)
           << " (condition number " << rep.condition_V << ")";
        throw NumericalError(os.str());
    }
    const Matrix v_inv = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    rep.Sigma_hat = symmetrized(v_inv * (B + C) * v_inv);
    rep.B_hat = std::move(B);
    rep.C_hat = std::move(C);
    rep.V_hat = std::move(V);
    rep.eval_point = std::move(eval_point);
    rep.family = std::move(family);
    return rep;
}

CovarianceReport sigma_hat(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                           const Eigen::Ref<const Point>& a) {
    check_point(sample, a);
    w.check_compatible(sample);
    const auto& wc = w.cluster_weights();
    const Eigen::Index d = sample.dim();
    Matrix B = Matrix::Zero(d, d);
    Matrix C = Matrix::Zero(d, d);
    Matrix V = Matrix::Zero(d, d);
    std::size_t nonsmooth = 0;
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix scores = cluster_scores(sample.cluster(i), fam, a);
        B += wc[i] * wc[i] * outer_sum(scores);
        C += wc[i] * wc[i] * cross_sum(scores);
        V += wc[i] * jacobian_sum(sample.cluster(i), fam, a, &nonsmooth);
    }
    const double inv_n = 1.0 / static_cast<double>(sample.total());
    CovarianceReport rep = assemble_sandwich(B * inv_n, C * inv_n, V * inv_n, a, fam.name());
    rep.nonsmooth_count = nonsmooth;
    return rep;
}

double relative_efficiency(const Matrix& sigma_unweighted, const Matrix& sigma_weighted) {
    if (sigma_unweighted.rows() != sigma_weighted.rows() || sigma_unweighted.cols() != sigma_weighted.cols()) {
        throw InputError("covariance matrices have different dimensions");
    }
    const double num = sigma_unweighted.determinant();
    const double den = sigma_weighted.determinant();
    if (!(num > 0.0) || !(den > 0.0)) {
        std::ostringstream os;
        os << "nonpositive covariance determinant (unweighted " << num << ", weighted " << den << ")";
        throw NumericalError(os.str());
    }
    return std::pow(num / den, 1.0 / static_cast<double>(sigma_unweighted.rows()));
}

double relative_efficiency(const CovarianceReport& unweighted, const CovarianceReport& weighted) {
    return relative_efficiency(unweighted.Sigma_hat, weighted.Sigma_hat);
}

AssumptionDiagnostics assumption_diagnostics(const WeightScheme& w, const ClusteredSample& sample, double eta) {
    if (!(eta > 0.0)) throw InputError("eta must be positive");
    w.check_compatible(sample);
    AssumptionDiagnostics diag;
    const double inv_n = 1.0 / static_cast<double>(sample.total());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const std::size_t m = sample.cluster_size(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < m; ++j) sq += w.weight(i, j) * w.weight(i, j);
        const double tot = w.cluster_total(i, m);
        const double idx = static_cast<double>(i + 1);
        diag.weight_mean += tot * inv_n;
        diag.c_w_finite += sq * inv_n;
        diag.kolmogorov_partial += tot * tot / (idx * idx);
        diag.lindeberg_sum += std::pow(tot, 2.0 + eta) * inv_n;
    }
    return diag;
}

// ---------------------------------------------------------------------------
// ClusterMoments

ClusterMoments::ClusterMoments(std::vector<std::size_t> sizes, Eigen::Index dim)
    : sizes_(std::move(sizes)), dim_(dim) {
    for (std::size_t m : sizes_) total_ += m;
    const Matrix zero = Matrix::Zero(dim, dim);
    outer_.assign(sizes_.size(), zero);
    cross_.assign(sizes_.size(), zero);
    jacobian_.assign(sizes_.size(), zero);
}

ClusterMoments ClusterMoments::compute(const ClusteredSample& sample, const EstimatorFamily& fam,
                                       const Eigen::Ref<const Point>& a) {
    check_point(sample, a);
    ClusterMoments mom(sample.sizes(), sample.dim());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix scores = cluster_scores(sample.cluster(i), fam, a);
        mom.outer_[i] = outer_sum(scores);
        mom.cross_[i] = cross_sum(scores);
        mom.jacobian_[i] = jacobian_sum(sample.cluster(i), fam, a, nullptr);
    }
    return mom;
}

ClusterMoments& ClusterMoments::operator+=(const ClusterMoments& other) {
    if (sizes_.empty() && outer_.empty()) {
        *this = other;
        return *this;
    }
    if (other.sizes_ != sizes_ || other.dim_ != dim_) throw InputError("cluster moments from different layouts");
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        outer_[i] += other.outer_[i];
        cross_[i] += other.cross_[i];
        jacobian_[i] += other.jacobian_[i];
    }
    return *this;
}

ClusterMoments& ClusterMoments::operator*=(double factor) {
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        outer_[i] *= factor;
        cross_[i] *= factor;
        jacobian_[i] *= factor;
    }
    return *this;
}

namespace {

void check_weights(std::span<const double> weights, std::size_t n) {
    if (weights.size() != n) throw InputError("weight vector does not match the cluster count");
}

}  // namespace

Matrix ClusterMoments::b(std::span<const double> weights) const {
    check_weights(weights, sizes_.size());
    Matrix out = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) out += weights[i] * weights[i] * outer_[i];
    return out / static_cast<double>(total_);
}

Matrix ClusterMoments::c(std::span<const double> weights) const {
    check_weights(weights, sizes_.size());
    Matrix out = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) out += weights[i] * weights[i] * cross_[i];
    return out / static_cast<double>(total_);
}

Matrix ClusterMoments::v(std::span<const double> weights) const {
    check_weights(weights, sizes_.size());
    Matrix out = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) out += weights[i] * jacobian_[i];
    return out / static_cast<double>(total_);
}

CovarianceReport ClusterMoments::sandwich(std::span<const double> weights, const Point& eval_point,
                                          const std::string& family) const {
    return assemble_sandwich(b(weights), c(weights), v(weights), eval_point, family);
}

double ClusterMoments::sandwich_det(std::span<const double> weights) const {
    check_weights(weights, sizes_.size());
    Matrix meat = Matrix::Zero(dim_, dim_);
    Matrix bread = Matrix::Zero(dim_, dim_);
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        meat += weights[i] * weights[i] * (outer_[i] + cross_[i]);
        bread += weights[i] * jacobian_[i];
    }
    const double inv_n = 1.0 / static_cast<double>(total_);
    const double det_v = (bread * inv_n).determinant();
    if (det_v == 0.0 || !std::isfinite(det_v)) return std::numeric_limits<double>::infinity();
    return (meat * inv_n).determinant() / (det_v * det_v);
}

}  // namespace wmest
