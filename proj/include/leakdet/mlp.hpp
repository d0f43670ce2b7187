#pragma once

// Multilayer perceptron regressor: tanh hidden layers, identity output,
// squared loss with L2 penalty, trained by full-batch gradient descent with
// momentum 0.1 and a backtracking step size so that accepted steps never
// increase the loss.  The output layer is initialised by ridge least squares
// on the initial hidden features, which puts plain gradient descent in a
// good basin.

#include <cmath>
#include <vector>

#include "leakdet/common.hpp"

namespace leakdet::ml {

struct MlpParams {
    std::vector<int> hidden;  // e.g. {10} or {10, 10}
    double alpha = 1e-4;      // L2 penalty
    double learning_rate = 0.05;
    double momentum = 0.1;
    int max_iter = 1000;
    double loss_tol = 1e-8;
    std::uint64_t seed = 0;
};

class Mlp {
  public:
    struct FitStatus {
        int iterations = 0;
        double final_loss = 0.0;
        bool converged = false;
    };

    void configure(std::size_t n_inputs, const MlpParams& params) {
        for (int h : params.hidden)
            if (h < 1) throw config_error("mlp: hidden layer units must be >= 1");
        if (params.hidden.empty() || params.hidden.size() > 2)
            throw config_error("mlp: one or two hidden layers supported");
        params_ = params;
        sizes_.clear();
        sizes_.push_back(int(n_inputs));
        for (int h : params.hidden) sizes_.push_back(h);
        sizes_.push_back(1);
        weights_.clear();
        biases_.clear();
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            weights_.emplace_back(std::size_t(sizes_[l + 1]), std::size_t(sizes_[l]), 0.0);
            biases_.emplace_back(std::size_t(sizes_[l + 1]), 0.0);
        }
    }

    FitStatus fit(const Matrix& x, const std::vector<double>& y, const MlpParams& params) {
        if (x.rows() == 0 || x.rows() != y.size())
            throw data_error("mlp: empty input or row/target mismatch");
        configure(x.cols(), params);
        Rng rng = make_rng(derive_seed(params.seed, 0x317a9));
        glorot_init(rng);
        least_squares_output(x, y);

        std::vector<double> theta = flat_params();
        std::vector<double> grad(theta.size()), velocity(theta.size(), 0.0),
            trial(theta.size());
        double lr = params.learning_rate;
        double loss = loss_and_grad(x, y, &grad);
        FitStatus status;
        int iter = 0;
        for (; iter < params.max_iter; ++iter) {
            for (std::size_t k = 0; k < theta.size(); ++k) {
                velocity[k] = params.momentum * velocity[k] - lr * grad[k];
                trial[k] = theta[k] + velocity[k];
            }
            set_flat_params(trial);
            const double trial_loss = loss_and_grad(x, y, nullptr);
            if (trial_loss <= loss) {
                theta = trial;
                const double improvement = loss - trial_loss;
                loss = trial_loss;
                lr *= 1.05;
                if (improvement < params.loss_tol) {
                    status.converged = true;
                    ++iter;
                    break;
                }
                loss_and_grad(x, y, &grad);
            } else {
                set_flat_params(theta);
                std::fill(velocity.begin(), velocity.end(), 0.0);
                lr *= 0.5;
                if (lr < 1e-14) {
                    status.converged = true;
                    ++iter;
                    break;
                }
            }
        }
        set_flat_params(theta);
        status.iterations = iter;
        status.final_loss = loss;
        status_ = status;
        return status;
    }

    double predict_row(const double* row) const {
        std::vector<double> act(row, row + std::size_t(sizes_[0]));
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            std::vector<double> next(std::size_t(sizes_[l + 1]));
            for (std::size_t o = 0; o < next.size(); ++o) {
                double s = biases_[l][o];
                const double* wrow = weights_[l].row(o);
                for (std::size_t i = 0; i < act.size(); ++i) s += wrow[i] * act[i];
                next[o] = l == weights_.size() - 1 ? s : std::tanh(s);
            }
            act = std::move(next);
        }
        return act[0];
    }

    std::vector<double> predict(const Matrix& x) const {
        if (x.cols() != std::size_t(sizes_[0]))
            throw data_error("mlp: input width " + std::to_string(x.cols()) +
                             " does not match fitted width " + std::to_string(sizes_[0]));
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    // Loss (mean squared error / 2 + alpha/(2n) * ||W||^2) and, when grad is
    // non-null, its analytic gradient in flattened parameter order.
    double loss_and_grad(const Matrix& x, const std::vector<double>& y,
                         std::vector<double>* grad) const {
        const std::size_t n = x.rows();
        const std::size_t layers = weights_.size();
        // Forward pass, keeping activations per layer.
        std::vector<Matrix> act(layers + 1);
        act[0] = x;
        for (std::size_t l = 0; l < layers; ++l) {
            const bool output = (l == layers - 1);
            Matrix z(n, std::size_t(sizes_[l + 1]));
            for (std::size_t r = 0; r < n; ++r) {
                const double* in = act[l].row(r);
                for (int o = 0; o < sizes_[l + 1]; ++o) {
                    double s = biases_[l][std::size_t(o)];
                    const double* wrow = weights_[l].row(std::size_t(o));
                    for (int i = 0; i < sizes_[l]; ++i) s += wrow[i] * in[i];
                    z.at(r, std::size_t(o)) = output ? s : std::tanh(s);
                }
            }
            act[l + 1] = std::move(z);
        }

        double loss = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double e = act[layers].at(r, 0) - y[r];
            loss += e * e;
        }
        loss /= 2.0 * double(n);
        double penalty = 0.0;
        for (const auto& w : weights_)
            for (double v : w.data()) penalty += v * v;
        loss += params_.alpha * penalty / (2.0 * double(n));

        if (!grad) return loss;
        grad->assign(param_count(), 0.0);

        // Backward pass: delta holds dL/d(pre-activation) per layer.
        Matrix delta(n, 1);
        for (std::size_t r = 0; r < n; ++r)
            delta.at(r, 0) = (act[layers].at(r, 0) - y[r]) / double(n);
        for (std::size_t l = layers; l-- > 0;) {
            // gradient wrt W_l, b_l
            double* gw = grad->data() + offset_of(l);
            double* gb = gw + weights_[l].rows() * weights_[l].cols();
            for (std::size_t r = 0; r < n; ++r) {
                const double* in = act[l].row(r);
                for (std::size_t o = 0; o < weights_[l].rows(); ++o) {
                    const double dl = delta.at(r, o);
                    if (dl == 0.0) continue;
                    double* gwrow = gw + o * weights_[l].cols();
                    for (std::size_t i = 0; i < weights_[l].cols(); ++i)
                        gwrow[i] += dl * in[i];
                    gb[o] += dl;
                }
            }
            const double scale = params_.alpha / double(n);
            for (std::size_t o = 0; o < weights_[l].rows(); ++o)
                for (std::size_t i = 0; i < weights_[l].cols(); ++i)
                    gw[o * weights_[l].cols() + i] += scale * weights_[l].at(o, i);
            if (l == 0) break;
            // propagate to previous layer through tanh'
            Matrix prev(n, weights_[l].cols());
            for (std::size_t r = 0; r < n; ++r) {
                for (std::size_t i = 0; i < weights_[l].cols(); ++i) {
                    double s = 0.0;
                    for (std::size_t o = 0; o < weights_[l].rows(); ++o)
                        s += weights_[l].at(o, i) * delta.at(r, o);
                    const double a = act[l].at(r, i);
                    prev.at(r, i) = s * (1.0 - a * a);
                }
            }
            delta = std::move(prev);
        }
        return loss;
    }

    std::size_t param_count() const {
        std::size_t k = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l)
            k += weights_[l].rows() * weights_[l].cols() + biases_[l].size();
        return k;
    }

    std::vector<double> flat_params() const {
        std::vector<double> out;
        out.reserve(param_count());
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            out.insert(out.end(), weights_[l].data().begin(), weights_[l].data().end());
            out.insert(out.end(), biases_[l].begin(), biases_[l].end());
        }
        return out;
    }

    void set_flat_params(const std::vector<double>& v) {
        std::size_t p = 0;
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            for (double& w : weights_[l].data()) w = v[p++];
            for (double& b : biases_[l]) b = v[p++];
        }
    }

    const std::vector<int>& layer_sizes() const { return sizes_; }
    const std::vector<Matrix>& weights() const { return weights_; }
    std::vector<Matrix>& mutable_weights() { return weights_; }
    const std::vector<std::vector<double>>& biases() const { return biases_; }
    std::vector<std::vector<double>>& mutable_biases() { return biases_; }
    const MlpParams& params() const { return params_; }
    MlpParams& mutable_params() { return params_; }
    const FitStatus& status() const { return status_; }

  private:
    std::size_t offset_of(std::size_t layer) const {
        std::size_t k = 0;
        for (std::size_t l = 0; l < layer; ++l)
            k += weights_[l].rows() * weights_[l].cols() + biases_[l].size();
        return k;
    }

    void glorot_init(Rng& rng) {
        for (std::size_t l = 0; l < weights_.size(); ++l) {
            const double limit =
                std::sqrt(6.0 / double(sizes_[l] + sizes_[l + 1]));
            for (double& w : weights_[l].data()) w = uniform_real(rng, -limit, limit);
            for (double& b : biases_[l]) b = 0.0;
        }
    }

    // Ridge least squares for the output layer over the current hidden
    // features; tiny dense solve (h <= 20).
    void least_squares_output(const Matrix& x, const std::vector<double>& y) {
        const std::size_t n = x.rows();
        const std::size_t layers = weights_.size();
        Matrix feats = x;
        for (std::size_t l = 0; l + 1 < layers; ++l) {
            Matrix z(n, std::size_t(sizes_[l + 1]));
            for (std::size_t r = 0; r < n; ++r) {
                const double* in = feats.row(r);
                for (int o = 0; o < sizes_[l + 1]; ++o) {
                    double s = biases_[l][std::size_t(o)];
                    const double* wrow = weights_[l].row(std::size_t(o));
                    for (int i = 0; i < sizes_[l]; ++i) s += wrow[i] * in[i];
                    z.at(r, std::size_t(o)) = std::tanh(s);
                }
            }
            feats = std::move(z);
        }
        const std::size_t h = feats.cols();
        // Normal equations with bias column.
        const std::size_t dim = h + 1;
        std::vector<double> ata(dim * dim, 0.0), aty(dim, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            const double* f = feats.row(r);
            for (std::size_t i = 0; i < h; ++i) {
                for (std::size_t j = 0; j < h; ++j) ata[i * dim + j] += f[i] * f[j];
                ata[i * dim + h] += f[i];
                aty[i] += f[i] * y[r];
            }
            ata[h * dim + h] += 1.0;
            for (std::size_t j = 0; j < h; ++j) ata[h * dim + j] += f[j];
            aty[h] += y[r];
        }
        const double ridge = std::max(1e-8, params_.alpha);
        for (std::size_t i = 0; i < h; ++i) ata[i * dim + i] += ridge;
        // Gaussian elimination with partial pivoting.
        std::vector<double> sol = aty;
        for (std::size_t col = 0; col < dim; ++col) {
            std::size_t piv = col;
            for (std::size_t r = col + 1; r < dim; ++r)
                if (std::fabs(ata[r * dim + col]) > std::fabs(ata[piv * dim + col])) piv = r;
            if (std::fabs(ata[piv * dim + col]) < 1e-14) continue;
            if (piv != col) {
                for (std::size_t cc = 0; cc < dim; ++cc)
                    std::swap(ata[piv * dim + cc], ata[col * dim + cc]);
                std::swap(sol[piv], sol[col]);
            }
            const double inv = 1.0 / ata[col * dim + col];
            for (std::size_t r = 0; r < dim; ++r) {
                if (r == col) continue;
                const double factor = ata[r * dim + col] * inv;
                if (factor == 0.0) continue;
                for (std::size_t cc = col; cc < dim; ++cc)
                    ata[r * dim + cc] -= factor * ata[col * dim + cc];
                sol[r] -= factor * sol[col];
            }
        }
        auto& wout = weights_.back();
        for (std::size_t i = 0; i < h; ++i) {
            const double d = ata[i * dim + i];
            wout.at(0, i) = d != 0.0 ? sol[i] / d : 0.0;
        }
        const double dlast = ata[h * dim + h];
        biases_.back()[0] = dlast != 0.0 ? sol[h] / dlast : 0.0;
    }

    MlpParams params_;
    std::vector<int> sizes_;
    std::vector<Matrix> weights_;     // weights_[l]: (sizes_[l+1] x sizes_[l])
    std::vector<std::vector<double>> biases_;
    FitStatus status_;
};

}  // namespace leakdet::ml
