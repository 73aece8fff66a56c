#pragma once
#include <cmath>
#include <vector>

#include "cfcml/graph.hpp"

namespace cfcml::trainer {

// Adaptive-moment optimizer with L2 weight decay folded into the gradient.
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;

    explicit Adam(std::vector<Param*> params, double wd = 1e-4)
        : weight_decay(wd), params_(std::move(params)) {
        for (Param* p : params_) {
            m_.push_back(Mat::zeros(p->value.rows, p->value.cols));
            v_.push_back(Mat::zeros(p->value.rows, p->value.cols));
        }
    }

    void zero_grad() {
        for (Param* p : params_) p->zero_grad();
    }

    void step(double lr) {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, t_);
        const double bc2 = 1.0 - std::pow(beta2, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            Param& p = *params_[k];
            for (std::size_t i = 0; i < p.value.a.size(); ++i) {
                const double grad = p.grad.a[i] + weight_decay * p.value.a[i];
                m_[k].a[i] = beta1 * m_[k].a[i] + (1.0 - beta1) * grad;
                v_[k].a[i] = beta2 * v_[k].a[i] + (1.0 - beta2) * grad * grad;
                const double mhat = m_[k].a[i] / bc1;
                const double vhat = v_[k].a[i] / bc2;
                p.value.a[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    long long steps() const { return t_; }
    const std::vector<Mat>& first_moments() const { return m_; }
    const std::vector<Mat>& second_moments() const { return v_; }
    void restore(long long t, std::vector<Mat> m, std::vector<Mat> v) {
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    std::vector<Param*> params_;
    std::vector<Mat> m_, v_;
    long long t_ = 0;
};

}  // namespace cfcml::trainer
