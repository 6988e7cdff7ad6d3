/*
 Copyright 2026 The SafeMPC Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "safempc/gp.hpp"

#include "safempc/errors.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace safempc
{
    namespace
    {
        const double kSqrt5 = std::sqrt(5.0);

        bool same_vector(const Eigen::VectorXd &a, const Eigen::VectorXd &b)
        {
            return a.size() == b.size() && (a.size() == 0 || a == b);
        }

        /// Cholesky of K + lambda^2 I with jitter escalation 1e-10 -> 1e-6.
        Eigen::MatrixXd factorize(const Eigen::MatrixXd &K, double noise_var, double &jitter)
        {
            const Eigen::Index n = K.rows();
            Eigen::MatrixXd A = K;
            A.diagonal().array() += noise_var;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            jitter = 0.0;
            if (llt.info() == Eigen::Success)
            {
                return llt.matrixL();
            }
            for (double j = 1e-10; j <= 1e-6 * (1.0 + 1e-9); j *= 10.0)
            {
                Eigen::MatrixXd Aj = A;
                Aj.diagonal().array() += j;
                llt.compute(Aj);
                if (llt.info() == Eigen::Success)
                {
                    jitter = j;
                    return llt.matrixL();
                }
            }
            throw FitError("GP fit: Gram matrix of size " + std::to_string(n) +
                           " is not positive definite after jitter escalation");
        }

        /// Kernel values k(z, Z_i) and, optionally, their gradients in z, against every row of Z.
        void kernel_against(const KernelSpec &kernel, const Eigen::VectorXd &z, const Eigen::MatrixXd &Z,
                            Eigen::VectorXd &k, Eigen::MatrixXd *dK)
        {
            const Eigen::Index n = Z.rows(), d = Z.cols();
            k.setZero(n);
            if (dK)
                dK->setZero(n, d);
            if (n == 0)
                return;
            if (kernel.has_linear())
            {
                k.noalias() += Z * kernel.linear_weights.cwiseProduct(z);
                if (dK)
                    *dK += Z * kernel.linear_weights.asDiagonal();
            }
            if (kernel.has_matern())
            {
                const Eigen::ArrayXXd D = (-(Z.rowwise() - z.transpose())).array();
                const Eigen::Array<double, 1, Eigen::Dynamic> inv_l2 =
                    kernel.lengthscales.array().square().inverse().transpose();
                const Eigen::ArrayXd r = (D.square().rowwise() * inv_l2).rowwise().sum().sqrt();
                const Eigen::ArrayXd e = (-kSqrt5 * r).exp();
                k.array() += kernel.signal_variance * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r.square()) * e;
                if (dK)
                {
                    const Eigen::ArrayXd c = kernel.signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * e;
                    dK->array() -= (D.rowwise() * inv_l2).colwise() * c;
                }
            }
        }
    } // namespace

    KernelFamily kernel_family_from_string(const std::string &name)
    {
        if (name == "linear")
            return KernelFamily::Linear;
        if (name == "matern52")
            return KernelFamily::Matern52;
        if (name == "sum" || name == "linear+matern52")
            return KernelFamily::Sum;
        throw InvalidInputError("unknown kernel family '" + name + "'");
    }

    std::string to_string(KernelFamily family)
    {
        switch (family)
        {
        case KernelFamily::Linear:
            return "linear";
        case KernelFamily::Matern52:
            return "matern52";
        case KernelFamily::Sum:
            return "sum";
        }
        return "unknown";
    }

    // ---------------------------------------------------------------- KernelSpec

    KernelSpec KernelSpec::linear(Eigen::VectorXd weights)
    {
        KernelSpec k;
        k.family = KernelFamily::Linear;
        k.linear_weights = std::move(weights);
        return k;
    }

    KernelSpec KernelSpec::matern52(Eigen::VectorXd lengthscales, double signal_variance)
    {
        KernelSpec k;
        k.family = KernelFamily::Matern52;
        k.lengthscales = std::move(lengthscales);
        k.signal_variance = signal_variance;
        return k;
    }

    KernelSpec KernelSpec::sum(Eigen::VectorXd weights, Eigen::VectorXd lengthscales, double signal_variance)
    {
        KernelSpec k;
        k.family = KernelFamily::Sum;
        k.linear_weights = std::move(weights);
        k.lengthscales = std::move(lengthscales);
        k.signal_variance = signal_variance;
        return k;
    }

    void KernelSpec::validate(Eigen::Index d) const
    {
        if (has_linear())
        {
            if (linear_weights.size() != d || !linear_weights.allFinite() || linear_weights.minCoeff() < 0.0)
            {
                throw InvalidInputError("KernelSpec: linear weights must be " + std::to_string(d) +
                                        " finite nonnegative values");
            }
        }
        if (has_matern())
        {
            if (lengthscales.size() != d || !lengthscales.allFinite() || !(lengthscales.minCoeff() > 0.0))
            {
                throw InvalidInputError("KernelSpec: lengthscales must be " + std::to_string(d) +
                                        " finite positive values");
            }
            if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
            {
                throw InvalidInputError("KernelSpec: signal variance must be positive");
            }
        }
    }

    double KernelSpec::operator()(const Eigen::VectorXd &z, const Eigen::VectorXd &zp) const
    {
        double k = 0.0;
        if (has_linear())
        {
            k += (linear_weights.array() * z.array() * zp.array()).sum();
        }
        if (has_matern())
        {
            const double r = ((z - zp).array() / lengthscales.array()).matrix().norm();
            k += signal_variance * (1.0 + kSqrt5 * r + 5.0 * r * r / 3.0) * std::exp(-kSqrt5 * r);
        }
        return k;
    }

    Eigen::VectorXd KernelSpec::gradient(const Eigen::VectorXd &z, const Eigen::VectorXd &zp) const
    {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(z.size());
        if (has_linear())
        {
            g += linear_weights.cwiseProduct(zp);
        }
        if (has_matern())
        {
            const Eigen::ArrayXd scaled = (z - zp).array() / lengthscales.array().square();
            const double r = ((z - zp).array() / lengthscales.array()).matrix().norm();
            g.array() -= signal_variance * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r) * scaled;
        }
        return g;
    }

    double KernelSpec::prior_variance(const Eigen::VectorXd &z) const
    {
        double k = 0.0;
        if (has_linear())
        {
            k += (linear_weights.array() * z.array().square()).sum();
        }
        if (has_matern())
        {
            k += signal_variance;
        }
        return k;
    }

    Eigen::VectorXd KernelSpec::prior_variance_gradient(const Eigen::VectorXd &z) const
    {
        if (has_linear())
        {
            return 2.0 * linear_weights.cwiseProduct(z);
        }
        return Eigen::VectorXd::Zero(z.size());
    }

    Eigen::MatrixXd KernelSpec::gram(const Eigen::MatrixXd &Z) const
    {
        const Eigen::Index n = Z.rows();
        Eigen::MatrixXd K(n, n);
        Eigen::VectorXd col;
        for (Eigen::Index i = 0; i < n; ++i)
        {
            kernel_against(*this, Z.row(i).transpose(), Z, col, nullptr);
            K.col(i) = col;
        }
        return 0.5 * (K + K.transpose());
    }

    bool KernelSpec::operator==(const KernelSpec &other) const
    {
        return family == other.family && same_vector(lengthscales, other.lengthscales) &&
               signal_variance == other.signal_variance && same_vector(linear_weights, other.linear_weights);
    }

    // ---------------------------------------------------------------- Dataset

    Dataset::Dataset(Eigen::MatrixXd Z, Eigen::MatrixXd Y, double noise)
        : inputs(std::move(Z)), targets(std::move(Y)), noise_std(noise)
    {
        validate();
    }

    Dataset Dataset::empty(Eigen::Index input_dim, Eigen::Index output_dim, double noise_std)
    {
        return Dataset(Eigen::MatrixXd(0, input_dim), Eigen::MatrixXd(0, output_dim), noise_std);
    }

    void Dataset::validate() const
    {
        if (inputs.rows() != targets.rows())
        {
            throw InvalidInputError("Dataset: inputs and targets have different row counts");
        }
        if (inputs.cols() < 1 || targets.cols() < 1)
        {
            throw InvalidInputError("Dataset: input and output dimensions must be >= 1");
        }
        if (!inputs.allFinite() || !targets.allFinite())
        {
            throw InvalidInputError("Dataset: non-finite entries");
        }
        if (!(noise_std > 0.0) || !std::isfinite(noise_std))
        {
            throw InvalidInputError("Dataset: noise std must be positive");
        }
    }

    void Dataset::append(const Eigen::VectorXd &z, const Eigen::VectorXd &y)
    {
        if (z.size() != input_dim() || y.size() != output_dim())
        {
            throw InvalidInputError("Dataset::append: dimension mismatch");
        }
        if (!z.allFinite() || !y.allFinite())
        {
            throw InvalidInputError("Dataset::append: non-finite sample");
        }
        inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
        targets.conservativeResize(targets.rows() + 1, Eigen::NoChange);
        inputs.row(inputs.rows() - 1) = z.transpose();
        targets.row(targets.rows() - 1) = y.transpose();
    }

    void Dataset::append(const Dataset &other)
    {
        for (Eigen::Index i = 0; i < other.size(); ++i)
        {
            append(other.inputs.row(i).transpose(), other.targets.row(i).transpose());
        }
    }

    Dataset Dataset::subset(const std::vector<int> &rows) const
    {
        Eigen::MatrixXd Z(static_cast<Eigen::Index>(rows.size()), input_dim());
        Eigen::MatrixXd Y(static_cast<Eigen::Index>(rows.size()), output_dim());
        for (std::size_t i = 0; i < rows.size(); ++i)
        {
            if (rows[i] < 0 || rows[i] >= size())
            {
                throw InvalidInputError("Dataset::subset: row index out of range");
            }
            Z.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
            Y.row(static_cast<Eigen::Index>(i)) = targets.row(rows[i]);
        }
        return Dataset(Z, Y, noise_std);
    }

    void Dataset::write_csv(std::ostream &os) const
    {
        for (Eigen::Index j = 0; j < input_dim(); ++j)
        {
            os << (j ? "," : "") << "z_" << j;
        }
        for (Eigen::Index j = 0; j < output_dim(); ++j)
        {
            os << ",y_" << j;
        }
        os << '\n' << std::setprecision(17);
        for (Eigen::Index i = 0; i < size(); ++i)
        {
            for (Eigen::Index j = 0; j < input_dim(); ++j)
            {
                os << (j ? "," : "") << inputs(i, j);
            }
            for (Eigen::Index j = 0; j < output_dim(); ++j)
            {
                os << ',' << targets(i, j);
            }
            os << '\n';
        }
    }

    Dataset Dataset::read_csv(std::istream &is, double noise_std)
    {
        std::string line;
        if (!std::getline(is, line))
        {
            throw InvalidInputError("Dataset::read_csv: missing header");
        }
        Eigen::Index d = 0, p = 0;
        {
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
            {
                if (cell.rfind("z_", 0) == 0 && p == 0)
                    ++d;
                else if (cell.rfind("y_", 0) == 0)
                    ++p;
                else
                    throw InvalidInputError("Dataset::read_csv: unexpected column '" + cell + "'");
            }
        }
        Dataset out = Dataset::empty(d, p, noise_std);
        std::vector<double> values;
        while (std::getline(is, line))
        {
            if (line.empty())
                continue;
            values.clear();
            std::stringstream ss(line);
            std::string cell;
            while (std::getline(ss, cell, ','))
            {
                values.push_back(std::stod(cell));
            }
            if (static_cast<Eigen::Index>(values.size()) != d + p)
            {
                throw InvalidInputError("Dataset::read_csv: row has wrong number of columns");
            }
            Eigen::Map<Eigen::VectorXd> v(values.data(), d + p);
            out.append(v.head(d), v.tail(p));
        }
        return out;
    }

    // ---------------------------------------------------------------- GPPosterior

    GPPosterior GPPosterior::prior(Eigen::Index input_dim, const std::vector<KernelSpec> &kernels, double noise_std,
                                   double beta)
    {
        if (kernels.empty())
        {
            throw InvalidInputError("GPPosterior: at least one output kernel required");
        }
        GPPosterior gp;
        gp.input_dim_ = input_dim;
        gp.data_ = Dataset::empty(input_dim, static_cast<Eigen::Index>(kernels.size()), noise_std);
        gp.kernels_ = kernels;
        gp.set_beta(beta);
        for (std::size_t j = 0; j < kernels.size(); ++j)
        {
            kernels[j].validate(input_dim);
            bool found = false;
            for (auto &g : gp.groups_)
            {
                if (g.kernel == kernels[j])
                {
                    g.outputs.push_back(static_cast<int>(j));
                    found = true;
                    break;
                }
            }
            if (!found)
            {
                Group g;
                g.kernel = kernels[j];
                g.outputs = {static_cast<int>(j)};
                g.L = Eigen::MatrixXd(0, 0);
                gp.groups_.push_back(std::move(g));
            }
        }
        gp.alpha_ = Eigen::MatrixXd(0, static_cast<Eigen::Index>(kernels.size()));
        return gp;
    }

    GPPosterior GPPosterior::fit(const Dataset &data, const std::vector<KernelSpec> &kernels, double beta)
    {
        data.validate();
        if (data.size() < 1)
        {
            throw InvalidInputError("GPPosterior::fit: at least one observation required");
        }
        if (static_cast<Eigen::Index>(kernels.size()) != data.output_dim())
        {
            throw InvalidInputError("GPPosterior::fit: one kernel per output dimension required");
        }
        GPPosterior gp = prior(data.input_dim(), kernels, data.noise_std, beta);
        gp.data_ = data;
        gp.alpha_.resize(data.size(), data.output_dim());
        const double noise_var = data.noise_std * data.noise_std;
        for (auto &g : gp.groups_)
        {
            g.L = factorize(g.kernel.gram(data.inputs), noise_var, g.jitter);
            for (int j : g.outputs)
            {
                const Eigen::VectorXd a = g.L.triangularView<Eigen::Lower>().solve(data.targets.col(j));
                gp.alpha_.col(j) = g.L.transpose().triangularView<Eigen::Upper>().solve(a);
            }
        }
        return gp;
    }

    GPPosterior GPPosterior::condition(const Dataset &data, const std::vector<KernelSpec> &kernels, double beta)
    {
        if (data.size() == 0)
        {
            return prior(data.input_dim(), kernels, data.noise_std, beta);
        }
        return fit(data, kernels, beta);
    }

    void GPPosterior::set_beta(double beta)
    {
        if (!(beta >= 0.0) || !std::isfinite(beta))
        {
            throw InvalidInputError("GPPosterior: beta must be finite and nonnegative");
        }
        beta_ = beta;
    }

    double GPPosterior::jitter() const
    {
        double j = 0.0;
        for (const auto &g : groups_)
        {
            j = std::max(j, g.jitter);
        }
        return j;
    }

    GPFullPrediction GPPosterior::evaluate(const Eigen::VectorXd &z, bool mean_jacobian, bool std_jacobian) const
    {
        if (z.size() != input_dim_)
        {
            throw InvalidInputError("GPPosterior: query has wrong dimension");
        }
        if (!z.allFinite())
        {
            throw InvalidInputError("GPPosterior: non-finite query");
        }
        const Eigen::Index n = data_.size();
        const Eigen::Index p = output_dim();
        const Eigen::Index d = input_dim_;

        GPFullPrediction out;
        out.value.mean = Eigen::VectorXd::Zero(p);
        out.value.std = Eigen::VectorXd::Zero(p);
        if (mean_jacobian || std_jacobian)
        {
            out.jacobians.d_mean = Eigen::MatrixXd::Zero(p, d);
            out.jacobians.d_std = Eigen::MatrixXd::Zero(p, d);
            out.jacobians.std_flagged.assign(static_cast<std::size_t>(p), false);
        }

        Eigen::VectorXd k(n);
        Eigen::MatrixXd dK(n, d);
        for (const auto &g : groups_)
        {
            const bool need_dk = mean_jacobian || std_jacobian;
            kernel_against(g.kernel, z, data_.inputs, k, need_dk ? &dK : nullptr);
            double var = g.kernel.prior_variance(z);
            Eigen::VectorXd v;
            if (n > 0)
            {
                v = g.L.triangularView<Eigen::Lower>().solve(k);
                var -= v.squaredNorm();
            }
            if (var < 0.0)
            {
                var = 0.0;
                clip_count_->fetch_add(1);
            }
            const double sd = std::sqrt(var);

            Eigen::VectorXd dstd;
            bool flagged = false;
            if (std_jacobian)
            {
                if (sd < kStdGradientFloor)
                {
                    dstd = Eigen::VectorXd::Zero(d);
                    flagged = true;
                }
                else
                {
                    Eigen::VectorXd dvar = g.kernel.prior_variance_gradient(z);
                    if (n > 0)
                    {
                        const Eigen::VectorXd w = g.L.transpose().triangularView<Eigen::Upper>().solve(v);
                        dvar -= 2.0 * dK.transpose() * w;
                    }
                    dstd = dvar / (2.0 * sd);
                }
            }

            for (int j : g.outputs)
            {
                out.value.std(j) = sd;
                if (n > 0)
                {
                    out.value.mean(j) = k.dot(alpha_.col(j));
                    if (mean_jacobian || std_jacobian)
                    {
                        out.jacobians.d_mean.row(j) = alpha_.col(j).transpose() * dK;
                    }
                }
                if (std_jacobian)
                {
                    out.jacobians.d_std.row(j) = dstd.transpose();
                    out.jacobians.std_flagged[static_cast<std::size_t>(j)] = flagged;
                }
            }
        }
        return out;
    }

    GPPrediction GPPosterior::predict(const Eigen::VectorXd &z) const
    {
        return evaluate(z, false, false).value;
    }

    GPJacobians GPPosterior::predict_jacobians(const Eigen::VectorXd &z) const
    {
        return evaluate(z, true, true).jacobians;
    }

    GPFullPrediction GPPosterior::predict_full(const Eigen::VectorXd &z) const
    {
        return evaluate(z, true, true);
    }

    GPFullPrediction GPPosterior::predict_with_mean_jacobian(const Eigen::VectorXd &z) const
    {
        return evaluate(z, true, false);
    }

    std::vector<Eigen::MatrixXd> GPPosterior::predict_mean_hessians(const Eigen::VectorXd &z) const
    {
        if (z.size() != input_dim_ || !z.allFinite())
        {
            throw InvalidInputError("GPPosterior: invalid query");
        }
        const Eigen::Index d = input_dim_;
        std::vector<Eigen::MatrixXd> out(static_cast<std::size_t>(output_dim()), Eigen::MatrixXd::Zero(d, d));
        for (const auto &g : groups_)
        {
            if (!g.kernel.has_matern())
            {
                continue; // linear kernel: mean is linear in z
            }
            const Eigen::ArrayXd inv_l2 = g.kernel.lengthscales.array().square().inverse();
            const double s2 = g.kernel.signal_variance;
            const Eigen::ArrayXXd D = (-(data_.inputs.rowwise() - z.transpose())).array();
            const Eigen::MatrixXd V = (D.rowwise() * inv_l2.transpose()).matrix();
            const Eigen::ArrayXd r = (D.square().matrix() * inv_l2.matrix()).array().sqrt();
            const Eigen::ArrayXd e = (-kSqrt5 * r).exp();
            const Eigen::VectorXd c_diag = (-s2 * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * e).matrix();
            const Eigen::ArrayXd c_outer = s2 * (25.0 / 3.0) * e;
            for (int j : g.outputs)
            {
                const double diag_sum = c_diag.dot(alpha_.col(j));
                const Eigen::VectorXd w = (c_outer * alpha_.col(j).array()).matrix();
                Eigen::MatrixXd H = V.transpose() * w.asDiagonal() * V;
                H.diagonal() += diag_sum * inv_l2.matrix();
                out[static_cast<std::size_t>(j)] = H;
            }
        }
        return out;
    }

    // ---------------------------------------------------------------- information

    double beta_from_theory(double B_g, double lambda, double gamma, double delta)
    {
        if (!(delta > 0.0 && delta < 1.0))
        {
            throw InvalidInputError("beta_from_theory: delta must lie in (0, 1)");
        }
        if (B_g < 0.0 || lambda < 0.0 || gamma < 0.0)
        {
            throw InvalidInputError("beta_from_theory: B_g, lambda and gamma must be nonnegative");
        }
        return B_g + 4.0 * lambda * std::sqrt(gamma + 1.0 + std::log(1.0 / delta));
    }

    double mutual_information(const std::vector<KernelSpec> &kernels, const Eigen::MatrixXd &Z, double noise_std)
    {
        if (!(noise_std > 0.0))
        {
            throw InvalidInputError("mutual_information: noise std must be positive");
        }
        if (Z.rows() == 0)
        {
            return 0.0;
        }
        const double inv_var = 1.0 / (noise_std * noise_std);
        double mi = 0.0;
        for (const auto &kernel : kernels)
        {
            kernel.validate(Z.cols());
            Eigen::MatrixXd A = inv_var * kernel.gram(Z);
            A.diagonal().array() += 1.0;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success)
            {
                throw FitError("mutual_information: I + K / lambda^2 not positive definite");
            }
            mi += Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
        }
        return mi;
    }

    std::vector<int> max_variance_subselect_indices(const Dataset &candidates, const std::vector<KernelSpec> &kernels,
                                                    int budget)
    {
        if (budget < 1)
        {
            throw InvalidInputError("max_variance_subselect: budget must be >= 1");
        }
        candidates.validate();
        const int N = static_cast<int>(candidates.size());
        std::vector<int> picked;
        if (N <= budget)
        {
            for (int i = 0; i < N; ++i)
                picked.push_back(i);
            return picked;
        }

        // One incremental Cholesky per distinct kernel; multiplicity weights the summed variance.
        struct Track
        {
            KernelSpec kernel;
            double weight = 0.0;
            Eigen::MatrixXd C; ///< N x budget, row i = L^{-1} k_S(z_i)
            Eigen::VectorXd var;
        };
        std::vector<Track> tracks;
        for (const auto &k : kernels)
        {
            k.validate(candidates.input_dim());
            bool found = false;
            for (auto &t : tracks)
            {
                if (t.kernel == k)
                {
                    t.weight += 1.0;
                    found = true;
                    break;
                }
            }
            if (!found)
            {
                Track t;
                t.kernel = k;
                t.weight = 1.0;
                t.C = Eigen::MatrixXd::Zero(N, budget);
                t.var.resize(N);
                for (int i = 0; i < N; ++i)
                    t.var(i) = k.prior_variance(candidates.inputs.row(i).transpose());
                tracks.push_back(std::move(t));
            }
        }

        const double noise_var = candidates.noise_std * candidates.noise_std;
        std::vector<bool> taken(static_cast<std::size_t>(N), false);
        for (int s = 0; s < budget; ++s)
        {
            int best = -1;
            double best_score = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < N; ++i)
            {
                if (taken[static_cast<std::size_t>(i)])
                    continue;
                double score = 0.0;
                for (const auto &t : tracks)
                    score += t.weight * std::max(0.0, t.var(i));
                if (score > best_score)
                {
                    best_score = score;
                    best = i;
                }
            }
            taken[static_cast<std::size_t>(best)] = true;
            picked.push_back(best);

            const Eigen::VectorXd zb = candidates.inputs.row(best).transpose();
            for (auto &t : tracks)
            {
                const Eigen::VectorXd cb = t.C.row(best).head(s).transpose();
                const double diag = std::sqrt(std::max(t.var(best) + noise_var, noise_var));
                for (int i = 0; i < N; ++i)
                {
                    const double kib = t.kernel(candidates.inputs.row(i).transpose(), zb);
                    const double c = (kib - t.C.row(i).head(s).dot(cb)) / diag;
                    t.C(i, s) = c;
                    t.var(i) -= c * c;
                }
            }
        }
        return picked;
    }

    Dataset max_variance_subselect(const Dataset &candidates, const std::vector<KernelSpec> &kernels, int budget)
    {
        return candidates.subset(max_variance_subselect_indices(candidates, kernels, budget));
    }

} // namespace safempc
