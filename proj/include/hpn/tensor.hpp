#pragma once

// Dense 2-D tensors of 64-bit reals with reverse-mode automatic
// differentiation. The graph is recorded only inside an
// autograd::RecordGuard scope, so inference paths never build a tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpn {

namespace autograd {

inline bool& recording_flag() {
    thread_local bool on = false;
    return on;
}

inline std::uint64_t& node_counter() {
    thread_local std::uint64_t n = 0;
    return n;
}

inline bool recording() { return recording_flag(); }

// Total number of graph nodes ever recorded on this thread. Lets tests
// assert that gradient-free code paths record nothing.
inline std::uint64_t recorded_node_count() { return node_counter(); }

class RecordGuard {
  public:
    explicit RecordGuard(bool on) : prev_(recording_flag()) { recording_flag() = on; }
    ~RecordGuard() { recording_flag() = prev_; }
    RecordGuard(const RecordGuard&) = delete;
    RecordGuard& operator=(const RecordGuard&) = delete;

  private:
    bool prev_;
};

}  // namespace autograd

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

inline std::string dims(int r, int c) {
    std::ostringstream os;
    os << r << "x" << c;
    return os.str();
}

// c[m x n] += a[m x k] * b[k x n]
inline void mm_nn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[m x k] += a[m x n] * b[k x n]^T
inline void mm_nt_acc(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * n;
        double* ci = c + static_cast<std::size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const double* bp = b + static_cast<std::size_t>(p) * n;
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += ai[j] * bp[j];
            ci[p] += acc;
        }
    }
}

// c[k x n] += a[m x k]^T * b[m x n]
inline void mm_tn_acc(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        const double* bi = b + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            double* cp = c + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) cp[j] += av * bi[j];
        }
    }
}

}  // namespace detail

class Tensor {
  public:
    struct Impl {
        int rows = 0;
        int cols = 0;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first accumulation
        bool requires_grad = false;
        std::vector<std::shared_ptr<Impl>> parents;
        std::function<void(const Impl&)> backprop;
        std::uint64_t visit_mark = 0;

        void ensure_grad() {
            if (grad.empty()) grad.assign(data.size(), 0.0);
        }
    };

    Tensor() = default;

    Tensor(int rows, int cols, double fill = 0.0, bool requires_grad = false)
        : impl_(std::make_shared<Impl>()) {
        detail::require(rows >= 1 && cols >= 1,
                        "tensor: dimensions must be positive, got " + detail::dims(rows, cols));
        impl_->rows = rows;
        impl_->cols = cols;
        impl_->data.assign(static_cast<std::size_t>(rows) * cols, fill);
        impl_->requires_grad = requires_grad;
    }

    static Tensor from_data(int rows, int cols, std::vector<double> values,
                            bool requires_grad = false) {
        detail::require(values.size() == static_cast<std::size_t>(rows) * cols,
                        "tensor: data length does not match shape " + detail::dims(rows, cols));
        Tensor t(rows, cols, 0.0, requires_grad);
        t.impl_->data = std::move(values);
        return t;
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        Tensor t(1, 1, v, requires_grad);
        return t;
    }

    bool defined() const { return impl_ != nullptr; }
    int rows() const { return impl_->rows; }
    int cols() const { return impl_->cols; }
    std::size_t size() const { return impl_->data.size(); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    double at(int r, int c) const {
        return impl_->data[static_cast<std::size_t>(r) * impl_->cols + c];
    }
    double& at(int r, int c) {
        return impl_->data[static_cast<std::size_t>(r) * impl_->cols + c];
    }

    double value() const {
        detail::require(size() == 1, "tensor: value() requires a scalar");
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const { return impl_->grad; }
    std::vector<double>& grad() { return impl_->grad; }
    void clear_grad() { impl_->grad.clear(); }

    bool is_leaf() const { return impl_->parents.empty(); }

    std::shared_ptr<Impl> impl() const { return impl_; }

  private:
    std::shared_ptr<Impl> impl_;

    friend Tensor make_op(int rows, int cols, std::vector<double> data,
                          std::vector<Tensor> inputs,
                          std::function<void(const Tensor::Impl&)> backprop);
};

// Wraps a freshly computed result; attaches it to the tape only when
// recording is on and some input participates in differentiation.
inline Tensor make_op(int rows, int cols, std::vector<double> data, std::vector<Tensor> inputs,
                      std::function<void(const Tensor::Impl&)> backprop) {
    Tensor out = Tensor::from_data(rows, cols, std::move(data));
    bool track = false;
    if (autograd::recording()) {
        for (const auto& in : inputs)
            if (in.impl()->requires_grad) track = true;
    }
    if (track) {
        out.impl_->requires_grad = true;
        out.impl_->parents.reserve(inputs.size());
        for (const auto& in : inputs) out.impl_->parents.push_back(in.impl());
        out.impl_->backprop = std::move(backprop);
        ++autograd::node_counter();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise and structural operations
// ---------------------------------------------------------------------------

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    detail::require(a.rows() == b.rows() && a.cols() == b.cols(),
                    std::string(op) + ": shape mismatch " + detail::dims(a.rows(), a.cols()) +
                        " vs " + detail::dims(b.rows(), b.cols()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [pa, pb](const Tensor::Impl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [pa, pb](const Tensor::Impl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto pa = a.impl(), pb = b.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [pa, pb](const Tensor::Impl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pa->grad[i] += self.grad[i] * pb->data[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                pb->grad[i] += self.grad[i] * pa->data[i];
        }
    });
}

// Elementwise maximum; on exact ties the gradient routes to the first operand.
inline Tensor max_elem(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max_elem");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
    auto pa = a.impl(), pb = b.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a, b}, [pa, pb](const Tensor::Impl& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            if (pa->data[i] >= pb->data[i]) {
                if (pa->requires_grad) {
                    pa->ensure_grad();
                    pa->grad[i] += self.grad[i];
                }
            } else if (pb->requires_grad) {
                pb->ensure_grad();
                pb->grad[i] += self.grad[i];
            }
        }
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
    auto pa = a.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [pa, c](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += c * self.grad[i];
    });
}

// x * s with a learnable 1x1 scalar s.
inline Tensor mul_scalar(const Tensor& x, const Tensor& s) {
    detail::require(s.size() == 1, "mul_scalar: scale must be 1x1");
    const double sv = s.data()[0];
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * sv;
    auto px = x.impl(), ps = s.impl();
    return make_op(x.rows(), x.cols(), std::move(out), {x, s}, [px, ps](const Tensor::Impl& self) {
        const double sv = ps->data[0];
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += sv * self.grad[i];
        }
        if (ps->requires_grad) {
            ps->ensure_grad();
            double acc = 0.0;
            for (std::size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * px->data[i];
            ps->grad[0] += acc;
        }
    });
}

inline Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
    auto pa = a.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [pa](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.data[i];
            pa->grad[i] += self.grad[i] * (1.0 - y * y);
        }
    });
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.data()[i]));
    auto pa = a.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [pa](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.data[i];
            pa->grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto pa = a.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [pa](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            if (pa->data[i] > 0.0) pa->grad[i] += self.grad[i];
    });
}

inline Tensor log(const Tensor& a) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        detail::require(a.data()[i] > 0.0, "log: input entries must be positive");
        out[i] = std::log(a.data()[i]);
    }
    auto pa = a.impl();
    return make_op(a.rows(), a.cols(), std::move(out), {a}, [pa](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            pa->grad[i] += self.grad[i] / pa->data[i];
    });
}

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.data()[i];
    auto pa = a.impl();
    return make_op(1, 1, {acc}, {a}, [pa](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += g;
    });
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require(a.cols() == b.rows(),
                    "matmul: inner dimensions disagree, " + detail::dims(a.rows(), a.cols()) +
                        " * " + detail::dims(b.rows(), b.cols()));
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    detail::mm_nn_acc(a.data(), b.data(), out.data(), m, k, n);
    auto pa = a.impl(), pb = b.impl();
    return make_op(m, n, std::move(out), {a, b}, [pa, pb, m, k, n](const Tensor::Impl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            detail::mm_nt_acc(self.grad.data(), pb->data.data(), pa->grad.data(), m, n, k);
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            detail::mm_tn_acc(pa->data.data(), self.grad.data(), pb->grad.data(), m, k, n);
        }
    });
}

inline Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(j) * m + i] = a.at(i, j);
    auto pa = a.impl();
    return make_op(n, m, std::move(out), {a}, [pa, m, n](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                pa->grad[static_cast<std::size_t>(i) * n + j] +=
                    self.grad[static_cast<std::size_t>(j) * m + i];
    });
}

// Adds a 1 x n row vector to every row of a.
inline Tensor add_rowvec(const Tensor& a, const Tensor& r) {
    detail::require(r.rows() == 1 && r.cols() == a.cols(),
                    "add_rowvec: expected 1x" + std::to_string(a.cols()) + ", got " +
                        detail::dims(r.rows(), r.cols()));
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(a.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out[static_cast<std::size_t>(i) * n + j] = a.at(i, j) + r.data()[j];
    auto pa = a.impl(), pr = r.impl();
    return make_op(m, n, std::move(out), {a, r}, [pa, pr, m, n](const Tensor::Impl& self) {
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
        }
        if (pr->requires_grad) {
            pr->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    pr->grad[j] += self.grad[static_cast<std::size_t>(i) * n + j];
        }
    });
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    detail::require(a.cols() == b.cols(), "concat_rows: column counts differ, " +
                                              detail::dims(a.rows(), a.cols()) + " vs " +
                                              detail::dims(b.rows(), b.cols()));
    const int n = a.cols();
    std::vector<double> out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    auto pa = a.impl(), pb = b.impl();
    const std::size_t asz = a.size();
    return make_op(a.rows() + b.rows(), n, std::move(out), {a, b},
                   [pa, pb, asz](const Tensor::Impl& self) {
                       if (pa->requires_grad) {
                           pa->ensure_grad();
                           for (std::size_t i = 0; i < asz; ++i) pa->grad[i] += self.grad[i];
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (std::size_t i = 0; i < pb->grad.size(); ++i)
                               pb->grad[i] += self.grad[asz + i];
                       }
                   });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    detail::require(!parts.empty(), "concat_cols: no inputs");
    const int m = parts[0].rows();
    int total = 0;
    for (const auto& p : parts) {
        detail::require(p.rows() == m, "concat_cols: row counts differ");
        total += p.cols();
    }
    std::vector<double> out(static_cast<std::size_t>(m) * total);
    int off = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p.cols(); ++j)
                out[static_cast<std::size_t>(i) * total + off + j] = p.at(i, j);
        off += p.cols();
    }
    std::vector<std::shared_ptr<Tensor::Impl>> impls;
    std::vector<int> widths;
    for (const auto& p : parts) {
        impls.push_back(p.impl());
        widths.push_back(p.cols());
    }
    return make_op(m, total, std::move(out), parts,
                   [impls, widths, m, total](const Tensor::Impl& self) {
                       int off = 0;
                       for (std::size_t k = 0; k < impls.size(); ++k) {
                           const int w = widths[k];
                           if (impls[k]->requires_grad) {
                               impls[k]->ensure_grad();
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < w; ++j)
                                       impls[k]->grad[static_cast<std::size_t>(i) * w + j] +=
                                           self.grad[static_cast<std::size_t>(i) * total + off + j];
                           }
                           off += w;
                       }
                   });
}

inline Tensor slice_cols(const Tensor& a, int c0, int len) {
    detail::require(c0 >= 0 && len >= 1 && c0 + len <= a.cols(),
                    "slice_cols: range [" + std::to_string(c0) + ", " + std::to_string(c0 + len) +
                        ") out of bounds for " + detail::dims(a.rows(), a.cols()));
    const int m = a.rows(), n = a.cols();
    std::vector<double> out(static_cast<std::size_t>(m) * len);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < len; ++j)
            out[static_cast<std::size_t>(i) * len + j] = a.at(i, c0 + j);
    auto pa = a.impl();
    return make_op(m, len, std::move(out), {a}, [pa, c0, len, m, n](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < len; ++j)
                pa->grad[static_cast<std::size_t>(i) * n + c0 + j] +=
                    self.grad[static_cast<std::size_t>(i) * len + j];
    });
}

inline Tensor slice_rows(const Tensor& a, int r0, int len) {
    detail::require(r0 >= 0 && len >= 1 && r0 + len <= a.rows(),
                    "slice_rows: range [" + std::to_string(r0) + ", " + std::to_string(r0 + len) +
                        ") out of bounds for " + detail::dims(a.rows(), a.cols()));
    const int n = a.cols();
    std::vector<double> out(a.values().begin() + static_cast<std::size_t>(r0) * n,
                            a.values().begin() + static_cast<std::size_t>(r0 + len) * n);
    auto pa = a.impl();
    return make_op(len, n, std::move(out), {a}, [pa, r0, n](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        const std::size_t base = static_cast<std::size_t>(r0) * n;
        for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[base + i] += self.grad[i];
    });
}

// Picks one entry (row-major index) as a 1x1 tensor.
inline Tensor select(const Tensor& a, int index) {
    detail::require(index >= 0 && static_cast<std::size_t>(index) < a.size(),
                    "select: index " + std::to_string(index) + " out of range");
    auto pa = a.impl();
    return make_op(1, 1, {a.data()[index]}, {a}, [pa, index](const Tensor::Impl& self) {
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        pa->grad[index] += self.grad[0];
    });
}

// ---------------------------------------------------------------------------
// Row-wise softmax with optional exclusion mask
// ---------------------------------------------------------------------------

// mask entries set to 1 are excluded: their output is exactly 0 and they do
// not contribute to the row max or the normalizer, which keeps every stored
// value finite. Rows where everything is masked are rejected.
inline Tensor softmax_rows(const Tensor& x, const std::vector<std::uint8_t>* mask = nullptr) {
    const int m = x.rows(), n = x.cols();
    if (mask)
        detail::require(mask->size() == x.size(),
                        "softmax_rows: mask size does not match " + detail::dims(m, n));
    std::vector<double> out(x.size(), 0.0);
    for (int i = 0; i < m; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * n;
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (int j = 0; j < n; ++j) {
            if (mask && (*mask)[base + j]) continue;
            any = true;
            mx = std::max(mx, x.data()[base + j]);
        }
        detail::require(any, "softmax_rows: row " + std::to_string(i) + " is fully masked");
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            if (mask && (*mask)[base + j]) continue;
            const double e = std::exp(x.data()[base + j] - mx);
            out[base + j] = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) {
            if (mask && (*mask)[base + j]) continue;
            out[base + j] /= z;
        }
    }
    auto px = x.impl();
    std::vector<std::uint8_t> mcopy = mask ? *mask : std::vector<std::uint8_t>();
    return make_op(m, n, std::move(out), {x},
                   [px, mcopy = std::move(mcopy), m, n](const Tensor::Impl& self) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (int i = 0; i < m; ++i) {
                           const std::size_t base = static_cast<std::size_t>(i) * n;
                           double dot = 0.0;
                           for (int j = 0; j < n; ++j) dot += self.grad[base + j] * self.data[base + j];
                           for (int j = 0; j < n; ++j) {
                               if (!mcopy.empty() && mcopy[base + j]) continue;
                               px->grad[base + j] +=
                                   self.data[base + j] * (self.grad[base + j] - dot);
                           }
                       }
                   });
}

// ---------------------------------------------------------------------------
// Batch normalization over rows (rows are the batch dimension)
// ---------------------------------------------------------------------------

struct BatchNormRunning {
    std::vector<double> mean;  // sized lazily on first training batch
    std::vector<double> var;
    double momentum = 0.1;
    double eps = 1e-5;
};

inline Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                         BatchNormRunning& running, bool train) {
    const int b = x.rows(), d = x.cols();
    detail::require(gamma.rows() == 1 && gamma.cols() == d, "batch_norm: gamma must be 1x" +
                                                                std::to_string(d));
    detail::require(beta.rows() == 1 && beta.cols() == d,
                    "batch_norm: beta must be 1x" + std::to_string(d));
    if (running.mean.empty()) {
        running.mean.assign(d, 0.0);
        running.var.assign(d, 1.0);
    }
    detail::require(static_cast<int>(running.mean.size()) == d,
                    "batch_norm: running stats sized for " +
                        std::to_string(running.mean.size()) + " features, input has " +
                        std::to_string(d));

    std::vector<double> mu(d), invstd(d);
    if (train) {
        detail::require(b >= 2, "batch_norm: training mode needs at least 2 rows, got " +
                                    std::to_string(b));
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < b; ++i) s += x.at(i, j);
            mu[j] = s / b;
        }
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < b; ++i) {
                const double c = x.at(i, j) - mu[j];
                s += c * c;
            }
            const double var = s / b;
            invstd[j] = 1.0 / std::sqrt(var + running.eps);
            running.mean[j] = (1.0 - running.momentum) * running.mean[j] + running.momentum * mu[j];
            running.var[j] = (1.0 - running.momentum) * running.var[j] + running.momentum * var;
        }
    } else {
        for (int j = 0; j < d; ++j) {
            mu[j] = running.mean[j];
            invstd[j] = 1.0 / std::sqrt(running.var[j] + running.eps);
        }
    }

    std::vector<double> out(x.size());
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < d; ++j)
            out[static_cast<std::size_t>(i) * d + j] =
                (x.at(i, j) - mu[j]) * invstd[j] * gamma.data()[j] + beta.data()[j];

    auto px = x.impl(), pg = gamma.impl(), pb = beta.impl();
    return make_op(
        b, d, std::move(out), {x, gamma, beta},
        [px, pg, pb, mu = std::move(mu), invstd = std::move(invstd), b, d,
         train](const Tensor::Impl& self) {
            // xhat recomputed from the captured batch statistics
            for (int j = 0; j < d; ++j) {
                double gsum = 0.0, gxhat = 0.0;
                for (int i = 0; i < b; ++i) {
                    const std::size_t k = static_cast<std::size_t>(i) * d + j;
                    const double xh = (px->data[k] - mu[j]) * invstd[j];
                    gsum += self.grad[k];
                    gxhat += self.grad[k] * xh;
                }
                if (pg->requires_grad) {
                    pg->ensure_grad();
                    pg->grad[j] += gxhat;
                }
                if (pb->requires_grad) {
                    pb->ensure_grad();
                    pb->grad[j] += gsum;
                }
                if (px->requires_grad) {
                    px->ensure_grad();
                    const double g = pg->data[j];
                    if (train) {
                        for (int i = 0; i < b; ++i) {
                            const std::size_t k = static_cast<std::size_t>(i) * d + j;
                            const double xh = (px->data[k] - mu[j]) * invstd[j];
                            px->grad[k] += g * invstd[j] *
                                           (self.grad[k] - gsum / b - xh * gxhat / b);
                        }
                    } else {
                        for (int i = 0; i < b; ++i) {
                            const std::size_t k = static_cast<std::size_t>(i) * d + j;
                            px->grad[k] += g * invstd[j] * self.grad[k];
                        }
                    }
                }
            }
        });
}

// Stateless variant: always normalizes with the statistics of the rows it is
// given and leaves no trace, so concurrent forward passes stay read-only.
inline Tensor batch_norm_batchstats(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                    double eps = 1e-5) {
    BatchNormRunning scratch;
    scratch.eps = eps;
    return batch_norm(x, gamma, beta, scratch, /*train=*/true);
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

inline void backward(const Tensor& loss) {
    detail::require(loss.defined() && loss.size() == 1, "backward: loss must be a scalar");
    auto root = loss.impl();
    detail::require(root->requires_grad,
                    "backward: loss is not part of a recorded computation graph");

    static std::uint64_t mark_source = 0;
    const std::uint64_t mark = ++mark_source;

    // Post-order over the recorded DAG: ancestors first, loss last.
    std::vector<Tensor::Impl*> topo;
    std::vector<std::pair<Tensor::Impl*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    root->visit_mark = mark;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Tensor::Impl* p = node->parents[next++].get();
            if (p->requires_grad && p->visit_mark != mark) {
                p->visit_mark = mark;
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    // Non-leaf grads are transient per pass; leaf grads accumulate across
    // passes until explicitly cleared.
    for (Tensor::Impl* n : topo)
        if (!n->parents.empty()) n->grad.assign(n->data.size(), 0.0);

    root->ensure_grad();
    root->grad[0] += 1.0;

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Tensor::Impl* n = *it;
        if (n->backprop && !n->grad.empty()) n->backprop(*n);
    }
}

}  // namespace hpn
