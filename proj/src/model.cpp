#include "wmest/model.hpp"

#include "wmest/errors.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace wmest {

namespace {

void check_dims(const Eigen::Ref<const Point>& x, const Eigen::Ref<const Point>& a) {
    if (x.size() != a.size() || x.size() == 0) {
        std::ostringstream os;
        os << "dimension mismatch: point has dimension " << x.size() << ", evaluation point has " << a.size();
        throw InputError(os.str());
    }
}

void check_positive(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) {
        std::ostringstream os;
        os << "weights must be finite and strictly positive, got " << w;
        throw InputError(os.str());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ClusteredSample

ClusteredSample::ClusteredSample(std::vector<Matrix> clusters) : clusters_(std::move(clusters)) {
    if (clusters_.empty()) throw InputError("a clustered sample needs at least one cluster");
    dim_ = clusters_.front().rows();
    if (dim_ < 1) throw InputError("points must have dimension >= 1");
    for (std::size_t i = 0; i < clusters_.size(); ++i) {
        const auto& c = clusters_[i];
        if (c.cols() < 1) throw InputError("cluster " + std::to_string(i) + " is empty");
        if (c.rows() != dim_) throw InputError("cluster " + std::to_string(i) + " has inconsistent dimension");
        if (!c.allFinite()) throw InputError("cluster " + std::to_string(i) + " contains non-finite coordinates");
        total_ += static_cast<std::size_t>(c.cols());
    }
}

ClusteredSample ClusteredSample::from_points(const std::vector<std::vector<Point>>& clusters) {
    std::vector<Matrix> mats;
    mats.reserve(clusters.size());
    for (const auto& c : clusters) {
        if (c.empty()) throw InputError("cluster with no points");
        Matrix m(c.front().size(), static_cast<Eigen::Index>(c.size()));
        for (std::size_t j = 0; j < c.size(); ++j) {
            if (c[j].size() != m.rows()) throw InputError("points of a cluster have different dimensions");
            m.col(static_cast<Eigen::Index>(j)) = c[j];
        }
        mats.push_back(std::move(m));
    }
    return ClusteredSample(std::move(mats));
}

std::vector<std::size_t> ClusteredSample::sizes() const {
    std::vector<std::size_t> out;
    out.reserve(clusters_.size());
    for (const auto& c : clusters_) out.push_back(static_cast<std::size_t>(c.cols()));
    return out;
}

ClusteredSample ClusteredSample::translated(const Point& shift) const {
    if (shift.size() != dim_) throw InputError("translation vector has the wrong dimension");
    std::vector<Matrix> moved = clusters_;
    for (auto& c : moved) c.colwise() += shift;
    return ClusteredSample(std::move(moved));
}

// ---------------------------------------------------------------------------
// WeightScheme

WeightScheme WeightScheme::per_cluster(std::vector<double> weights) {
    if (weights.empty()) throw InputError("empty weight vector");
    for (double w : weights) check_positive(w);
    WeightScheme s;
    s.mode_ = WeightMode::PerCluster;
    s.cluster_ = std::move(weights);
    return s;
}

WeightScheme WeightScheme::per_observation(std::vector<std::vector<double>> weights) {
    if (weights.empty()) throw InputError("empty weight vector");
    for (const auto& c : weights) {
        if (c.empty()) throw InputError("cluster with no observation weights");
        for (double w : c) check_positive(w);
    }
    WeightScheme s;
    s.mode_ = WeightMode::PerObservation;
    s.observation_ = std::move(weights);
    return s;
}

WeightScheme WeightScheme::uniform(const ClusteredSample& sample) {
    return per_cluster(std::vector<double>(sample.cluster_count(), 1.0));
}

double WeightScheme::weight(std::size_t i, std::size_t j) const {
    return mode_ == WeightMode::PerCluster ? cluster_[i] : observation_[i][j];
}

double WeightScheme::cluster_total(std::size_t i, std::size_t cluster_size) const {
    if (mode_ == WeightMode::PerCluster) return cluster_[i] * static_cast<double>(cluster_size);
    return std::accumulate(observation_[i].begin(), observation_[i].end(), 0.0);
}

const std::vector<double>& WeightScheme::cluster_weights() const {
    if (mode_ != WeightMode::PerCluster) throw InputError("operation requires per-cluster weights");
    return cluster_;
}

void WeightScheme::check_compatible(const ClusteredSample& sample) const {
    const std::size_t n = sample.cluster_count();
    if (mode_ == WeightMode::PerCluster) {
        if (cluster_.size() != n) {
            throw InputError("weight scheme has " + std::to_string(cluster_.size()) + " cluster weights for " +
                             std::to_string(n) + " clusters");
        }
        return;
    }
    if (observation_.size() != n) throw InputError("observation weights do not match the cluster count");
    for (std::size_t i = 0; i < n; ++i) {
        if (observation_[i].size() != sample.cluster_size(i)) {
            throw InputError("observation weights of cluster " + std::to_string(i) + " do not match its size");
        }
    }
}

std::vector<double> WeightScheme::expand(const ClusteredSample& sample) const {
    check_compatible(sample);
    std::vector<double> out;
    out.reserve(sample.total());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        for (std::size_t j = 0; j < sample.cluster_size(i); ++j) out.push_back(weight(i, j));
    }
    return out;
}

double WeightScheme::mean_weight(const ClusteredSample& sample) const {
    check_compatible(sample);
    double sum = 0.0;
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) sum += cluster_total(i, sample.cluster_size(i));
    return sum / static_cast<double>(sample.total());
}

WeightScheme WeightScheme::normalized(const ClusteredSample& sample) const {
    return scaled(1.0 / mean_weight(sample));
}

WeightScheme WeightScheme::scaled(double factor) const {
    check_positive(factor);
    WeightScheme s = *this;
    for (double& w : s.cluster_) w *= factor;
    for (auto& c : s.observation_) {
        for (double& w : c) w *= factor;
    }
    return s;
}

// ---------------------------------------------------------------------------
// EstimatorFamily

EstimatorFamily EstimatorFamily::huber(double k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw InputError("Huber tuning constant must be positive");
    return EstimatorFamily(FamilyKind::Huber, k);
}

EstimatorFamily EstimatorFamily::lp_median(double p) {
    if (!(p > 2.0) || !std::isfinite(p)) throw InputError("L_p-median exponent must exceed 2");
    return EstimatorFamily(FamilyKind::LpMedian, p);
}

EstimatorFamily EstimatorFamily::parse(std::string_view name, double huber_k, double lp_p) {
    if (name == "mean") return mean();
    if (name == "spatial-median" || name == "median") return spatial_median();
    if (name == "huber") return huber(huber_k);
    if (name == "lp-median" || name == "lp") return lp_median(lp_p);
    throw InputError("unknown estimator family '" + std::string(name) + "'");
}

std::string EstimatorFamily::name() const {
    std::ostringstream os;
    switch (kind_) {
        case FamilyKind::Mean: return "mean";
        case FamilyKind::SpatialMedian: return "spatial-median";
        case FamilyKind::Huber: os << "huber(k=" << param_ << ")"; break;
        case FamilyKind::LpMedian: os << "lp-median(p=" << param_ << ")"; break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// rho / psi / psi-dot

double rho_eval(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x, const Eigen::Ref<const Point>& a) {
    check_dims(x, a);
    const double r = (x - a).norm();
    switch (fam.kind()) {
        case FamilyKind::Mean: return 0.5 * r * r;
        case FamilyKind::SpatialMedian: return r;
        case FamilyKind::Huber: {
            const double k = fam.parameter();
            return r <= k ? 0.5 * r * r : k * r - 0.5 * k * k;
        }
        case FamilyKind::LpMedian: return std::pow(r, fam.parameter());
    }
    return 0.0;
}

Point psi_eval(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x, const Eigen::Ref<const Point>& a) {
    check_dims(x, a);
    const Point diff = a - x;
    const double r = diff.norm();
    switch (fam.kind()) {
        case FamilyKind::Mean: return diff;
        case FamilyKind::SpatialMedian:
            if (r < kTieTolerance) return Point::Zero(diff.size());
            return diff / r;
        case FamilyKind::Huber: {
            const double k = fam.parameter();
            return r <= k ? diff : Point(k * diff / r);
        }
        case FamilyKind::LpMedian: {
            const double p = fam.parameter();
            if (r == 0.0) return Point::Zero(diff.size());
            return p * std::pow(r, p - 2.0) * diff;
        }
    }
    return diff;
}

JacobianValue psi_jacobian(const EstimatorFamily& fam, const Eigen::Ref<const Point>& x,
                           const Eigen::Ref<const Point>& a) {
    check_dims(x, a);
    const Eigen::Index d = x.size();
    const Point diff = a - x;
    const double r = diff.norm();
    const Matrix eye = Matrix::Identity(d, d);
    JacobianValue out;
    switch (fam.kind()) {
        case FamilyKind::Mean: out.value = eye; break;
        case FamilyKind::SpatialMedian:
            if (r < kTieTolerance) {
                out.value = Matrix::Zero(d, d);
                out.on_nonsmooth_locus = true;
            } else {
                const Point u = diff / r;
                out.value = (eye - u * u.transpose()) / r;
            }
            break;
        case FamilyKind::Huber: {
            const double k = fam.parameter();
            if (r == k) out.on_nonsmooth_locus = true;
            if (r <= k) {
                out.value = eye;
            } else {
                const Point u = diff / r;
                out.value = (k / r) * (eye - u * u.transpose());
            }
            break;
        }
        case FamilyKind::LpMedian: {
            const double p = fam.parameter();
            if (r == 0.0) {
                out.value = Matrix::Zero(d, d);
            } else {
                const Point u = diff / r;
                out.value = p * std::pow(r, p - 2.0) * (eye + (p - 2.0) * u * u.transpose());
            }
            break;
        }
    }
    return out;
}

double objective(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                 const Eigen::Ref<const Point>& a) {
    w.check_compatible(sample);
    double sum = 0.0;
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix& c = sample.cluster(i);
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            sum += w.weight(i, static_cast<std::size_t>(j)) * rho_eval(fam, c.col(j), a);
        }
    }
    return sum / static_cast<double>(sample.total());
}

Point estimating_function(const ClusteredSample& sample, const WeightScheme& w, const EstimatorFamily& fam,
                          const Eigen::Ref<const Point>& a) {
    w.check_compatible(sample);
    Point sum = Point::Zero(sample.dim());
    for (std::size_t i = 0; i < sample.cluster_count(); ++i) {
        const Matrix& c = sample.cluster(i);
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            sum += w.weight(i, static_cast<std::size_t>(j)) * psi_eval(fam, c.col(j), a);
        }
    }
    return sum / static_cast<double>(sample.total());
}

}  // namespace wmest
