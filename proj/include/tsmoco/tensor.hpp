#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tsmoco {

// Thrown on dimension mismatches; message names the offending shapes.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on differentiation-contract violations (non-scalar backward,
// double backward, loss not on the active tape, missing grads).
struct GraphError : std::runtime_error {
    explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

class Tape;

namespace detail {

struct TensorData {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    Tape* tape = nullptr;  // tape that recorded the producing op
    int node = -1;         // op index on that tape

    void accumulate(const double* g, std::size_t n);
};

}  // namespace detail

// Dense row-major float64 tensor. Copying a Tensor copies the handle, not
// the storage; parameters rely on this so the optimizer, EMA update and
// serialization all see the same buffer.
class Tensor {
   public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor from(std::vector<double> data, std::vector<int> shape,
                       bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return d_ != nullptr; }
    const std::vector<int>& shape() const { return d_->shape; }
    std::int64_t size() const { return static_cast<std::int64_t>(d_->value.size()); }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int rows() const { return d_->shape.at(0); }
    int cols() const { return d_->shape.at(1); }

    std::span<const double> values() const { return d_->value; }
    std::span<double> values_mut() { return d_->value; }
    double at(int i) const { return d_->value[static_cast<std::size_t>(i)]; }
    double at(int i, int j) const {
        return d_->value[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) +
                         static_cast<std::size_t>(j)];
    }
    double item() const;

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool b) { d_->requires_grad = b; }
    bool has_grad() const { return !d_->grad.empty(); }
    std::span<const double> grad() const { return d_->grad; }
    std::span<double> grad_mut() { return d_->grad; }
    void zero_grad();

    // Deep copy of the values, detached from any tape, requires_grad=false.
    Tensor detach() const;

    Tape* tape() const { return d_->tape; }
    int node() const { return d_->node; }

    detail::TensorData* data_ptr() const { return d_.get(); }
    const std::shared_ptr<detail::TensorData>& impl() const { return d_; }

   private:
    explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
    std::shared_ptr<detail::TensorData> d_;
};

// Define-by-run differentiation tape. Operations executed while a tape is
// active (and touching at least one grad-requiring input) append a backward
// closure; backward() replays the closures in reverse recording order, which
// is a valid topological order by construction.
class Tape {
   public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // RAII activation for the current thread.
    class Scope {
       public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;

       private:
        Tape* prev_;
    };

    static Tape* active();

    // Seeds d(loss)/d(loss) = 1 and runs all recorded backward rules once.
    // loss must be a scalar recorded on this tape.
    void backward(const Tensor& loss);

    std::size_t num_ops() const { return ops_.size(); }

    int record(std::function<void()> backward_fn);

   private:
    std::vector<std::function<void()>> ops_;
    bool backward_done_ = false;
};

// Suspends recording on the active tape for the current thread.
class NoGrad {
   public:
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;

   private:
    Tape* prev_;
};

// ---- elementwise and linear-algebra operations ----
// All operations are pure: they allocate a fresh output and never mutate
// inputs. Binary elementwise ops require identical shapes (no implicit
// broadcasting); add_rowvec is the one explicit row-broadcast primitive.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sqrt(const Tensor& a);

// a: [m x k], b: [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// a: [r x c], v: rank-1 length c; adds v to every row.
Tensor add_rowvec(const Tensor& a, const Tensor& v);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Axis reductions for rank-2 tensors; axis 0 reduces over rows.
Tensor sum(const Tensor& a, int axis);
Tensor mean(const Tensor& a, int axis);

// Numerically stable (max-subtracted) softmax along `axis` of a rank-2
// tensor; rank-1 inputs are treated as a single row.
Tensor softmax(const Tensor& a, int axis);
Tensor log_softmax(const Tensor& a, int axis);

// Per-row normalization over the last axis to zero mean / unit variance,
// then elementwise affine with gamma/beta (rank-1, length = last dim).
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps);

// Row/column surgery on rank-2 tensors (half-open ranges).
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
inline Tensor row(const Tensor& a, int i) { return slice_rows(a, i, i + 1); }

// out[i] = a[i, idx[i]] for each row of a rank-2 tensor.
Tensor pick(const Tensor& a, const std::vector<int>& idx);

// Identity forward whose backward rule deliberately scales gradients by
// `factor`. Exists solely so the gradcheck CLI can demonstrate that a broken
// backward rule is detected.
Tensor faulty_identity(const Tensor& a, double factor);

std::string shape_str(const std::vector<int>& s);

}  // namespace tsmoco
