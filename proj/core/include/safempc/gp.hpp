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

#ifndef SAFEMPC_GP_HPP_
#define SAFEMPC_GP_HPP_

#include <Eigen/Dense>

#include <atomic>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace safempc
{
    enum class KernelFamily
    {
        Linear,
        Matern52,
        Sum ///< Linear + Matern52
    };

    KernelFamily kernel_family_from_string(const std::string &name);
    std::string to_string(KernelFamily family);

    /**
     * @brief Covariance function on R^d.
     *
     * Linear:   k(z,z') = sum_i w_i z_i z'_i
     * Matern52: k(z,z') = s^2 (1 + sqrt5 r + 5 r^2 / 3) exp(-sqrt5 r),  r^2 = sum_i (z_i - z'_i)^2 / l_i^2
     * Sum:      Linear + Matern52
     */
    struct KernelSpec
    {
        KernelFamily family = KernelFamily::Matern52;
        Eigen::VectorXd lengthscales;
        double signal_variance = 1.0;
        Eigen::VectorXd linear_weights;

        static KernelSpec linear(Eigen::VectorXd weights);
        static KernelSpec matern52(Eigen::VectorXd lengthscales, double signal_variance);
        static KernelSpec sum(Eigen::VectorXd weights, Eigen::VectorXd lengthscales, double signal_variance);

        bool has_linear() const { return family != KernelFamily::Matern52; }
        bool has_matern() const { return family != KernelFamily::Linear; }

        /// Throws InvalidInputError unless the hyperparameters fit input dimension @p d.
        void validate(Eigen::Index d) const;

        double operator()(const Eigen::VectorXd &z, const Eigen::VectorXd &zp) const;
        /// d k(z, z') / d z.
        Eigen::VectorXd gradient(const Eigen::VectorXd &z, const Eigen::VectorXd &zp) const;
        /// k(z, z) and its gradient in z.
        double prior_variance(const Eigen::VectorXd &z) const;
        Eigen::VectorXd prior_variance_gradient(const Eigen::VectorXd &z) const;

        /// Gram matrix K_ij = k(Z_i, Z_j) over the rows of Z.
        Eigen::MatrixXd gram(const Eigen::MatrixXd &Z) const;

        bool operator==(const KernelSpec &other) const;
    };

    /// Training data: inputs z = (x, u) and residual targets y = x_next - h(x, u).
    struct Dataset
    {
        Eigen::MatrixXd inputs;  ///< n x d
        Eigen::MatrixXd targets; ///< n x p
        double noise_std = 1e-3;

        Dataset() = default;
        Dataset(Eigen::MatrixXd Z, Eigen::MatrixXd Y, double noise_std);
        static Dataset empty(Eigen::Index input_dim, Eigen::Index output_dim, double noise_std);

        Eigen::Index size() const { return inputs.rows(); }
        Eigen::Index input_dim() const { return inputs.cols(); }
        Eigen::Index output_dim() const { return targets.cols(); }

        void validate() const;
        void append(const Eigen::VectorXd &z, const Eigen::VectorXd &y);
        void append(const Dataset &other);
        Dataset subset(const std::vector<int> &rows) const;

        /// CSV with header z_0..z_{d-1},y_0..y_{p-1}.
        void write_csv(std::ostream &os) const;
        static Dataset read_csv(std::istream &is, double noise_std);
    };

    struct GPPrediction
    {
        Eigen::VectorXd mean;
        Eigen::VectorXd std;
    };

    struct GPJacobians
    {
        Eigen::MatrixXd d_mean; ///< p x d
        Eigen::MatrixXd d_std;  ///< p x d
        /// Outputs whose std fell below kStdGradientFloor; their d_std row is zero.
        std::vector<bool> std_flagged;
    };

    struct GPFullPrediction
    {
        GPPrediction value;
        GPJacobians jacobians;
    };

    inline constexpr double kStdGradientFloor = 1e-12;

    /**
     * @brief Posterior of independent GPs, one per output dimension, with confidence scaling beta.
     *
     * Outputs sharing an identical KernelSpec share a single Cholesky factorization, so the
     * predictive variance is computed once per distinct kernel.
     */
    class GPPosterior
    {
    public:
        /// Requires data.size() >= 1.
        static GPPosterior fit(const Dataset &data, const std::vector<KernelSpec> &kernels, double beta);
        /// Posterior without observations (mean 0, variance k(z,z)).
        static GPPosterior prior(Eigen::Index input_dim, const std::vector<KernelSpec> &kernels, double noise_std,
                                 double beta);
        /// fit() for non-empty data, prior() otherwise.
        static GPPosterior condition(const Dataset &data, const std::vector<KernelSpec> &kernels, double beta);

        Eigen::Index input_dim() const { return input_dim_; }
        Eigen::Index output_dim() const { return static_cast<Eigen::Index>(kernels_.size()); }
        Eigen::Index size() const { return data_.size(); }
        double beta() const { return beta_; }
        void set_beta(double beta);
        double noise_std() const { return data_.noise_std; }
        const Dataset &data() const { return data_; }
        const std::vector<KernelSpec> &kernels() const { return kernels_; }
        /// Largest jitter added to any Gram matrix during fitting.
        double jitter() const;

        GPPrediction predict(const Eigen::VectorXd &z) const;
        GPJacobians predict_jacobians(const Eigen::VectorXd &z) const;
        GPFullPrediction predict_full(const Eigen::VectorXd &z) const;
        /// Mean, std and mean Jacobian only (no std derivative).
        GPFullPrediction predict_with_mean_jacobian(const Eigen::VectorXd &z) const;

        /// Hessian d^2 mu_j / dz^2 of every output mean (d x d each).
        std::vector<Eigen::MatrixXd> predict_mean_hessians(const Eigen::VectorXd &z) const;

        /// Number of predictive variances clipped at zero so far (shared by copies).
        long variance_clip_count() const { return clip_count_->load(); }

    private:
        struct Group
        {
            KernelSpec kernel;
            std::vector<int> outputs;
            Eigen::MatrixXd L; ///< lower Cholesky factor of K + (lambda^2 + jitter) I
            double jitter = 0.0;
        };

        GPFullPrediction evaluate(const Eigen::VectorXd &z, bool mean_jacobian, bool std_jacobian) const;

        Eigen::Index input_dim_ = 0;
        Dataset data_;
        std::vector<KernelSpec> kernels_;
        std::vector<Group> groups_;
        Eigen::MatrixXd alpha_; ///< (K + lambda^2 I)^{-1} y, n x p
        double beta_ = 2.0;
        std::shared_ptr<std::atomic<long>> clip_count_ = std::make_shared<std::atomic<long>>(0);
    };

    /// beta = B_g + 4 lambda sqrt(gamma + 1 + ln(1/delta)).
    double beta_from_theory(double B_g, double lambda, double gamma, double delta);

    /// I(g_Z; g) = 1/2 sum_j log det(I + lambda^{-2} K_j(Z)).
    double mutual_information(const std::vector<KernelSpec> &kernels, const Eigen::MatrixXd &Z, double noise_std);

    /**
     * @brief Greedy maximum-variance selection.
     *
     * Repeatedly picks the candidate with the largest predictive variance (summed over
     * outputs) under the GP conditioned on the points picked so far; ties go to the lowest
     * index. Returns candidate row indices in selection order. If the candidate count does
     * not exceed @p budget all rows are returned in their original order.
     */
    std::vector<int> max_variance_subselect_indices(const Dataset &candidates, const std::vector<KernelSpec> &kernels,
                                                    int budget);
    Dataset max_variance_subselect(const Dataset &candidates, const std::vector<KernelSpec> &kernels, int budget);

} // namespace safempc

#endif // SAFEMPC_GP_HPP_
