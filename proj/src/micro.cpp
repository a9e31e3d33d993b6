#include "scmlab/micro.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Cholesky>

#include "scmlab/rng.hpp"

namespace scm::micro {

namespace {

void fill_gaussian(GaussianStream& g, WeightMatrix& m) {
    g.fill(std::span<double>(m.data(), static_cast<std::size_t>(m.size())));
}

// Orthonormalizes row r of `m` against `basis` rows [0, nb) and its own rows
// [0, r), two passes of modified Gram–Schmidt.
void orthonormalize_row(WeightMatrix& m, Eigen::Index r, const WeightMatrix* basis, Eigen::Index nb) {
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index b = 0; b < nb; ++b) m.row(r) -= m.row(r).dot(basis->row(b)) * basis->row(b);
        for (Eigen::Index q = 0; q < r; ++q) m.row(r) -= m.row(r).dot(m.row(q)) * m.row(q);
    }
    const double n = m.row(r).norm();
    if (!(n > 1e-8)) throw NumericalError("Gram-Schmidt: degenerate random direction");
    m.row(r) /= n;
}

}  // namespace

void SimConfig::validate() const {
    if (N < 1 || K < 1 || M < 1) throw ConfigError("SimConfig: N, K and M must be positive");
    if (N < 100 && !allow_small_n)
        throw ConfigError("SimConfig: N = " + std::to_string(N) + " is below 100 (pass allow_small_n to override)");
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ConfigError("SimConfig: eta must be positive");
    if (steps < 1) throw ConfigError("SimConfig: steps must be >= 1");
    if (measure_stride < 1) throw ConfigError("SimConfig: measure_stride must be >= 1");
}

WeightMatrix init_teacher(int M, int N, std::uint64_t seed) {
    if (M < 1 || N < 1) throw ConfigError("init_teacher: M and N must be positive");
    if (M > N) throw ConfigError("init_teacher: M = " + std::to_string(M) + " exceeds N = " + std::to_string(N));
    WeightMatrix b(M, N);
    GaussianStream g(seed, kTeacherStream);
    fill_gaussian(g, b);
    for (Eigen::Index r = 0; r < M; ++r) orthonormalize_row(b, r, nullptr, 0);
    return b;
}

WeightMatrix init_student(int K, int N, const OrderParameters& target, const WeightMatrix& B, std::uint64_t seed) {
    const int M = static_cast<int>(B.rows());
    if (B.cols() != N) throw ConfigError("init_student: teacher has the wrong dimension");
    if (target.students() != K || target.teachers() != M)
        throw ConfigError("init_student: target shape does not match K and M");
    if (K + M > N) throw ConfigError("init_student: K + M exceeds N");
    try {
        target.validate();
    } catch (const DomainError& e) {
        throw ConfigError(std::string("init_student: target is not a valid state: ") + e.what());
    }
    const Eigen::MatrixXd bbt = B * B.transpose();
    if ((bbt - target.T).cwiseAbs().maxCoeff() > 1e-8)
        throw ConfigError("init_student: target T does not match the teacher Gram matrix");

    // Coefficients of J in span(B): A = R T⁻¹.
    const Eigen::LDLT<Eigen::MatrixXd> tinv(target.T);
    const Eigen::MatrixXd a = tinv.solve(target.R.transpose()).transpose();
    Eigen::MatrixXd residual = target.Q - a * target.R.transpose();
    residual = 0.5 * (residual + residual.transpose()).eval();
    Eigen::MatrixXd l;
    try {
        l = moments::pivoted_cholesky(residual);
    } catch (const DomainError&) {
        throw ConfigError("init_student: target is not realizable (Q - R T^-1 R^T is not PSD)");
    }

    WeightMatrix e(K, N);
    GaussianStream g(seed, kStudentStream);
    fill_gaussian(g, e);
    for (Eigen::Index r = 0; r < K; ++r) orthonormalize_row(e, r, &B, M);

    WeightMatrix j = a * B + l * e;
    const double err_r = (j * B.transpose() - target.R).cwiseAbs().maxCoeff();
    const double err_q = (j * j.transpose() - target.Q).cwiseAbs().maxCoeff();
    if (err_r > 1e-8 || err_q > 1e-8)
        throw NumericalError("init_student: realized overlaps miss the target by " +
                             std::to_string(std::max(err_r, err_q)));
    return j;
}

void sgd_step(MicroSystem& sys, const Eigen::Ref<const Eigen::VectorXd>& xi) {
    if (xi.size() != sys.N) throw ConfigError("sgd_step: input has the wrong dimension");
    const Eigen::VectorXd x = sys.J * xi;
    const Eigen::VectorXd y = sys.B * xi;
    double tau = 0.0, sigma = 0.0;
    for (Eigen::Index n = 0; n < y.size(); ++n) tau += activation(sys.activation, y(n));
    for (Eigen::Index i = 0; i < x.size(); ++i) sigma += activation(sys.activation, x(i));
    Eigen::VectorXd delta(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) delta(i) = (tau - sigma) * activation_derivative(sys.activation, x(i));
    sys.J.noalias() += (sys.eta / sys.N) * delta * xi.transpose();
    ++sys.steps_done;
    if (!delta.allFinite() || !sys.J.allFinite())
        throw StepDivergenceError("sgd_step: non-finite student weights", sys.steps_done);
}

OrderParameters measure(const MicroSystem& sys) {
    Eigen::MatrixXd q = sys.J * sys.J.transpose();
    Eigen::MatrixXd t = sys.B * sys.B.transpose();
    q = 0.5 * (q + q.transpose()).eval();
    t = 0.5 * (t + t.transpose()).eval();
    return {sys.J * sys.B.transpose(), q, t};
}

MicroSystem make_system(const SimConfig& cfg, const OrderParameters& initial) {
    cfg.validate();
    MicroSystem sys;
    sys.N = cfg.N;
    sys.rng_seed = cfg.seed;
    sys.eta = cfg.eta;
    sys.activation = cfg.activation;
    sys.B = init_teacher(cfg.M, cfg.N, cfg.seed);
    sys.J = init_student(cfg.K, cfg.N, initial, sys.B, cfg.seed);
    return sys;
}

Trajectory run(const SimConfig& cfg, const OrderParameters& initial) {
    MicroSystem sys = make_system(cfg, initial);
    const NetConfig net{cfg.K, cfg.M, cfg.eta, cfg.activation, Eta2Mode::Off};

    Trajectory traj;
    traj.config = net;
    traj.initial = initial;
    traj.step = 1.0 / cfg.N;
    traj.stride = cfg.measure_stride;
    traj.source = TrajectorySource::Sim;

    auto record = [&](long long mu) {
        OrderParameters s = measure(sys);
        const double e = macro::gen_error(s, net);
        traj.samples.push_back({static_cast<double>(mu) / cfg.N, std::move(s), e});
    };
    record(0);

    GaussianStream examples(cfg.seed, kExampleStream);
    Eigen::VectorXd xi(cfg.N);
    for (long long mu = 1; mu <= cfg.steps; ++mu) {
        examples.fill(std::span<double>(xi.data(), static_cast<std::size_t>(cfg.N)));
        try {
            sgd_step(sys, xi);
        } catch (const StepDivergenceError& e) {
            throw DivergenceError(e.what(), traj.samples.back());
        }
        if (mu % cfg.measure_stride == 0 || mu == cfg.steps) record(mu);
    }
    return traj;
}

moments::McEstimate test_set_error(const MicroSystem& sys, long long n, std::uint64_t seed) {
    if (n < 2) throw ConfigError("test_set_error: need at least 2 samples");
    GaussianStream g(seed, kTestStream);
    Eigen::VectorXd xi(sys.N);
    double mean = 0.0, m2 = 0.0;
    for (long long s = 1; s <= n; ++s) {
        g.fill(std::span<double>(xi.data(), static_cast<std::size_t>(sys.N)));
        const Eigen::VectorXd x = sys.J * xi;
        const Eigen::VectorXd y = sys.B * xi;
        double d = 0.0;
        for (Eigen::Index n2 = 0; n2 < y.size(); ++n2) d += activation(sys.activation, y(n2));
        for (Eigen::Index i = 0; i < x.size(); ++i) d -= activation(sys.activation, x(i));
        const double f = 0.5 * d * d;
        const double delta = f - mean;
        mean += delta / static_cast<double>(s);
        m2 += delta * (f - mean);
    }
    return {mean, std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n))};
}

DriftEstimate empirical_drift(const OrderParameters& state, const SimConfig& cfg, long long samples) {
    if (samples < 2) throw ConfigError("empirical_drift: need at least 2 samples");
    MicroSystem base = make_system(cfg, state);
    const OrderParameters s0 = measure(base);
    const Eigen::VectorXd f0 = flatten(s0);

    GaussianStream examples(cfg.seed, kExampleStream);
    Eigen::VectorXd xi(cfg.N);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(f0.size());
    Eigen::VectorXd m2 = Eigen::VectorXd::Zero(f0.size());
    MicroSystem sys = base;
    for (long long s = 1; s <= samples; ++s) {
        examples.fill(std::span<double>(xi.data(), static_cast<std::size_t>(cfg.N)));
        sys.J = base.J;
        sgd_step(sys, xi);
        const OrderParameters s1{sys.J * sys.B.transpose(), sys.J * sys.J.transpose(), s0.T};
        const Eigen::VectorXd f = static_cast<double>(cfg.N) * (flatten(s1) - f0);
        const Eigen::VectorXd delta = f - mean;
        mean += delta / static_cast<double>(s);
        m2 += delta.cwiseProduct(f - mean);
    }
    DriftEstimate out;
    out.mean = mean;
    out.stderr_mean = (m2 / static_cast<double>(samples - 1) / static_cast<double>(samples)).cwiseSqrt();
    return out;
}

}  // namespace scm::micro
