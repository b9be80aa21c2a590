#pragma once

// Fixed-topology reverse-mode compute graph. The decoder needs only a
// handful of primitives (per-pixel linear layers, ReLU, one transposed
// convolution, bilinear warping, a discretized-Laplace rate node); each is
// implemented here with forward evaluation and an exact backward rule,
// recorded on an append-only tape.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccv {

template <typename T>
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Tensor() = default;
  Tensor(int r, int c, T fill = T(0)) : rows(r), cols(c) {
    if (r < 1 || c < 1) throw std::invalid_argument("Tensor: dims must be >= 1");
    v.assign(static_cast<size_t>(r) * c, fill);
  }
  static Tensor from(int r, int c, std::vector<T> data) {
    Tensor t(r, c);
    if (data.size() != t.v.size()) throw std::invalid_argument("Tensor::from: size mismatch");
    t.v = std::move(data);
    return t;
  }

  size_t size() const { return v.size(); }
  T& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  T at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

// Multiplication counts per decoder stage. Exact integers, additive across
// composed operations; the analytic complexity report must reproduce them.
struct MacBreakdown {
  uint64_t arm = 0;
  uint64_t upsampling = 0;
  uint64_t synthesis = 0;
  uint64_t inter = 0;
  uint64_t chroma = 0;

  uint64_t total() const { return arm + upsampling + synthesis + inter + chroma; }
  MacBreakdown& operator+=(const MacBreakdown& o) {
    arm += o.arm;
    upsampling += o.upsampling;
    synthesis += o.synthesis;
    inter += o.inter;
    chroma += o.chroma;
    return *this;
  }
  bool operator==(const MacBreakdown& o) const = default;
};

enum class MacStage : uint8_t { kNone, kArm, kUpsampling, kSynthesis, kInter, kChroma };

// ARM causal context: fixed 12-neighbor pattern, (row, col) offsets relative
// to the current element. All offsets precede the element in raster order.
inline constexpr std::array<std::pair<int, int>, 12> kArmContextOffsets = {{
    {-2, -1}, {-2, 0}, {-2, 1}, {-1, -2}, {-1, -1}, {-1, 0},
    {-1, 1},  {-1, 2}, {0, -1}, {0, -2},  {0, -3},  {-2, 2},
}};

inline constexpr int kArmContextSize = 12;
inline constexpr double kLogScaleClamp = 8.0;   // |log b| bound in arm outputs
inline constexpr double kRateProbFloor = 1.0 / 65536.0;  // 2^-16 per symbol

// Laplace CDF with location mu and scale b, evaluated at t.
template <typename T>
inline T laplace_cdf(T t, T mu, T b) {
  T z = (t - mu) / b;
  return z <= T(0) ? T(0.5) * std::exp(z) : T(1) - T(0.5) * std::exp(-z);
}

template <typename T>
class Tape {
 public:
  // -- construction of the graph -------------------------------------------

  int leaf(Tensor<T> t) { return push(Op::kLeaf, {}, std::move(t)); }

  int add(int a, int b) {
    const auto& ta = val(a);
    require_same_shape(ta, val(b), "add");
    Tensor<T> out = ta;
    const auto& tb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
    return push(Op::kAdd, {a, b}, std::move(out));
  }

  int sub(int a, int b) {
    const auto& ta = val(a);
    require_same_shape(ta, val(b), "sub");
    Tensor<T> out = ta;
    const auto& tb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
    return push(Op::kSub, {a, b}, std::move(out));
  }

  // Elementwise product; one multiplication per element.
  int mul(int a, int b) {
    const auto& ta = val(a);
    require_same_shape(ta, val(b), "mul");
    Tensor<T> out = ta;
    const auto& tb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
    count_macs(out.v.size());
    return push(Op::kMul, {a, b}, std::move(out));
  }

  // scale*x + shift with compile-time-constant coefficients. Multiplications
  // are counted only when scale != 1.
  int affine(int a, T scale, T shift) {
    Tensor<T> out = val(a);
    for (auto& x : out.v) x = scale * x + shift;
    if (scale != T(1)) count_macs(out.v.size());
    int id = push(Op::kAffine, {a}, std::move(out));
    nodes_[id].f0 = scale;
    return id;
  }

  int relu(int a) {
    Tensor<T> out = val(a);
    for (auto& x : out.v) x = x > T(0) ? x : T(0);
    return push(Op::kRelu, {a}, std::move(out));
  }

  // clamp(x, 0, 1); gradient is 1 strictly inside (0, 1), else 0.
  int clamp01(int a) {
    Tensor<T> out = val(a);
    for (auto& x : out.v) x = x < T(0) ? T(0) : (x > T(1) ? T(1) : x);
    return push(Op::kClamp01, {a}, std::move(out));
  }

  // y = x W^T + b. x is [N x I], w is [O x I] row-major, b is [O x 1].
  int linear(int x, int w, int b) {
    const auto& tx = val(x);
    const auto& tw = val(w);
    const auto& tb = val(b);
    if (tx.cols != tw.cols) throw std::invalid_argument("linear: input width != weight width");
    if (tb.rows != tw.rows || tb.cols != 1)
      throw std::invalid_argument("linear: bias shape mismatch");
    const int n = tx.rows, in = tx.cols, out_w = tw.rows;
    Tensor<T> out(n, out_w);
    for (int r = 0; r < n; ++r) {
      const T* xr = &tx.v[static_cast<size_t>(r) * in];
      T* yr = &out.v[static_cast<size_t>(r) * out_w];
      for (int o = 0; o < out_w; ++o) {
        const T* wr = &tw.v[static_cast<size_t>(o) * in];
        T acc = tb.v[o];
        for (int i = 0; i < in; ++i) acc += xr[i] * wr[i];
        yr[o] = acc;
      }
    }
    count_macs(static_cast<uint64_t>(n) * in * out_w);
    return push(Op::kLinear, {x, w, b}, std::move(out));
  }

  // Transposed convolution, kernel 8x8, stride 2, no bias. Output is the
  // centered 2h x 2w window of the full (2h+6) x (2w+6) result, i.e. 3
  // samples cropped from each border. Every output sample touches exactly
  // 16 taps (zero-padded gather), so the count is 16 per output sample.
  int tconv_up2(int x, int k) {
    const auto& tx = val(x);
    const auto& tk = val(k);
    if (tk.rows != 8 || tk.cols != 8) throw std::invalid_argument("tconv_up2: kernel must be 8x8");
    const int h = tx.rows, w = tx.cols;
    const int oh = 2 * h, ow = 2 * w;
    Tensor<T> out(oh, ow);
    // padded input: 2 zeros on each side keeps the 4x4 tap window in range
    const int ph = h + 4, pw = w + 4;
    std::vector<T> pad(static_cast<size_t>(ph) * pw, T(0));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        pad[static_cast<size_t>(r + 2) * pw + (c + 2)] = tx.at(r, c);
    for (int y = 0; y < oh; ++y) {
      // taps: input index i with kernel row u = y+3-2i in [0,8)
      const int i_hi = (y + 3) / 2;  // floor
      for (int xo = 0; xo < ow; ++xo) {
        const int j_hi = (xo + 3) / 2;
        T acc = T(0);
        for (int di = 0; di < 4; ++di) {
          const int i = i_hi - di;
          const int u = y + 3 - 2 * i;
          const T* prow = &pad[static_cast<size_t>(i + 2) * pw];
          const T* krow = &tk.v[static_cast<size_t>(u) * 8];
          for (int dj = 0; dj < 4; ++dj) {
            const int j = j_hi - dj;
            acc += prow[j + 2] * krow[xo + 3 - 2 * j];
          }
        }
        out.at(y, xo) = acc;
      }
    }
    count_macs(static_cast<uint64_t>(oh) * ow * 16);
    return push(Op::kTconvUp2, {x, k}, std::move(out));
  }

  // Top-left crop of a plane.
  int crop(int a, int h, int w) {
    const auto& ta = val(a);
    if (h > ta.rows || w > ta.cols) throw std::invalid_argument("crop: target larger than input");
    Tensor<T> out(h, w);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) out.at(r, c) = ta.at(r, c);
    return push(Op::kCrop, {a}, std::move(out));
  }

  // Bilinear warp with gather semantics: out(y,x) samples ref at
  // (y + fy(y,x), x + fx(y,x)), clamped to the image border. Differentiable
  // in the reference and in both flow components. Four tap multiplications
  // per output sample are counted.
  int warp(int ref, int fx, int fy) {
    const auto& tr = val(ref);
    require_same_shape(val(fx), tr, "warp flow x");
    require_same_shape(val(fy), tr, "warp flow y");
    const int h = tr.rows, w = tr.cols;
    const auto& tfx = val(fx);
    const auto& tfy = val(fy);
    Tensor<T> out(h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T sx = T(x) + tfx.at(y, x);
        T sy = T(y) + tfy.at(y, x);
        if (sx < T(0)) sx = T(0);
        if (sx > T(w - 1)) sx = T(w - 1);
        if (sy < T(0)) sy = T(0);
        if (sy > T(h - 1)) sy = T(h - 1);
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0 = static_cast<int>(std::floor(sy));
        const int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
        const int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
        const T ax = sx - T(x0);
        const T ay = sy - T(y0);
        const T top = (T(1) - ax) * tr.at(y0, x0) + ax * tr.at(y0, x1);
        const T bot = (T(1) - ax) * tr.at(y1, x0) + ax * tr.at(y1, x1);
        out.at(y, x) = (T(1) - ay) * top + ay * bot;
      }
    }
    count_macs(static_cast<uint64_t>(h) * w * 4);
    return push(Op::kWarp, {ref, fx, fy}, std::move(out));
  }

  // 2x2 average pooling with a folded scale factor: out = scale * mean(2x2).
  // One multiplication per output sample (the 0.25*scale factor).
  int avgpool2(int a, T scale = T(1)) {
    const auto& ta = val(a);
    if (ta.rows % 2 || ta.cols % 2) throw std::invalid_argument("avgpool2: dims must be even");
    const int oh = ta.rows / 2, ow = ta.cols / 2;
    const T f = scale * T(0.25);
    Tensor<T> out(oh, ow);
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c)
        out.at(r, c) = f * (ta.at(2 * r, 2 * c) + ta.at(2 * r, 2 * c + 1) +
                            ta.at(2 * r + 1, 2 * c) + ta.at(2 * r + 1, 2 * c + 1));
    count_macs(static_cast<uint64_t>(oh) * ow);
    int id = push(Op::kAvgPool2, {a}, std::move(out));
    nodes_[id].f0 = f;
    return id;
  }

  // Flattens K same-sized inputs (planes or column vectors) into the columns
  // of an [N x K] matrix, row-major element order per input.
  int stack_cols(const std::vector<int>& ids) {
    if (ids.empty()) throw std::invalid_argument("stack_cols: empty");
    const size_t n = val(ids[0]).size();
    for (int id : ids)
      if (val(id).size() != n) throw std::invalid_argument("stack_cols: size mismatch");
    const int k = static_cast<int>(ids.size());
    Tensor<T> out(static_cast<int>(n), k);
    for (int j = 0; j < k; ++j) {
      const auto& t = val(ids[j]);
      for (size_t r = 0; r < n; ++r) out.v[r * k + j] = t.v[r];
    }
    return push(Op::kStackCols, ids, std::move(out));
  }

  // Extracts column j of a matrix, reshaped to (h, w) with h*w == rows.
  int col(int m, int j, int h, int w) {
    const auto& tm = val(m);
    if (j < 0 || j >= tm.cols) throw std::invalid_argument("col: index out of range");
    if (static_cast<size_t>(h) * w != static_cast<size_t>(tm.rows))
      throw std::invalid_argument("col: reshape mismatch");
    Tensor<T> out(h, w);
    for (int r = 0; r < tm.rows; ++r) out.v[r] = tm.v[static_cast<size_t>(r) * tm.cols + j];
    int id = push(Op::kCol, {m}, std::move(out));
    nodes_[id].p0 = j;
    return id;
  }

  // Gathers the 12 causal neighbors of every element of a plane into an
  // [N x 12] matrix; positions outside the plane contribute 0.
  int gather_contexts(int plane) {
    const auto& tp = val(plane);
    const int h = tp.rows, w = tp.cols;
    Tensor<T> out(h * w, kArmContextSize);
    size_t n = 0;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c, ++n) {
        T* row = &out.v[n * kArmContextSize];
        for (int k = 0; k < kArmContextSize; ++k) {
          const int rr = r + kArmContextOffsets[k].first;
          const int cc = c + kArmContextOffsets[k].second;
          row[k] = (rr >= 0 && rr < h && cc >= 0 && cc < w) ? tp.at(rr, cc) : T(0);
        }
      }
    }
    return push(Op::kGatherContexts, {plane}, std::move(out));
  }

  // Straight-through rounding: round in the forward pass, identity gradient.
  int ste_round(int a) {
    Tensor<T> out = val(a);
    for (auto& x : out.v) x = std::round(x);
    return push(Op::kSteRound, {a}, std::move(out));
  }

  // Per-element coding cost in bits under a discretized Laplace model.
  // mu and raw_log_b are [N x 1] arm outputs; x holds the N values being
  // coded (any shape). b = exp(clamp(raw_log_b, -8, 8)); the probability of
  // the width-1 bin around x is floored at 2^-16.
  int laplace_rate(int mu, int raw_log_b, int x) {
    const auto& tm = val(mu);
    const auto& tl = val(raw_log_b);
    const auto& tx = val(x);
    if (tm.size() != tx.size() || tl.size() != tx.size())
      throw std::invalid_argument("laplace_rate: size mismatch");
    const size_t n = tx.size();
    Tensor<T> out(static_cast<int>(n), 1);
    const T inv_ln2 = T(1) / std::log(T(2));
    for (size_t i = 0; i < n; ++i) {
      T lb = tl.v[i];
      if (lb < T(-kLogScaleClamp)) lb = T(-kLogScaleClamp);
      if (lb > T(kLogScaleClamp)) lb = T(kLogScaleClamp);
      const T b = std::exp(lb);
      const T p = laplace_cdf(tx.v[i] + T(0.5), tm.v[i], b) -
                  laplace_cdf(tx.v[i] - T(0.5), tm.v[i], b);
      const T pf = p > T(kRateProbFloor) ? p : T(kRateProbFloor);
      out.v[i] = -std::log(pf) * inv_ln2;
    }
    return push(Op::kLaplaceRate, {mu, raw_log_b, x}, std::move(out));
  }

  // Sum of all elements -> 1x1 scalar.
  int sum(int a) {
    const auto& ta = val(a);
    T acc = T(0);
    for (T x : ta.v) acc += x;
    Tensor<T> out(1, 1);
    out.v[0] = acc;
    return push(Op::kSum, {a}, std::move(out));
  }

  // Mean squared error -> 1x1 scalar.
  int mse(int a, int b) {
    const auto& ta = val(a);
    require_same_shape(ta, val(b), "mse");
    const auto& tb = val(b);
    T acc = T(0);
    for (size_t i = 0; i < ta.v.size(); ++i) {
      const T d = ta.v[i] - tb.v[i];
      acc += d * d;
    }
    Tensor<T> out(1, 1);
    out.v[0] = acc / T(ta.v.size());
    return push(Op::kMse, {a, b}, std::move(out));
  }

  // -- evaluation ------------------------------------------------------------

  const Tensor<T>& value(int id) const { return node(id).val; }

  const Tensor<T>& grad(int id) const {
    const Node& nd = node(id);
    if (!ran_backward_) throw std::logic_error("grad: backward has not run");
    return nd.grad;
  }

  // Reverse-mode sweep from a scalar loss node. Visits each node exactly
  // once, in reverse creation (= reverse topological) order.
  void backward(int loss) {
    if (nodes_.empty()) throw std::logic_error("backward: no forward pass recorded");
    const Node& ln = node(loss);
    if (ln.val.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (auto& nd : nodes_) {
      nd.grad = Tensor<T>(nd.val.rows, nd.val.cols, T(0));
    }
    nodes_[loss].grad.v[0] = T(1);
    for (int id = loss; id >= 0; --id) backward_node(id);
    ran_backward_ = true;
  }

  size_t node_count() const { return nodes_.size(); }

  // -- multiplication accounting ---------------------------------------------

  void set_mac_stage(MacStage s) { stage_ = s; }
  const MacBreakdown& macs() const { return macs_; }
  void reset_macs() { macs_ = MacBreakdown{}; }

 private:
  enum class Op : uint8_t {
    kLeaf, kAdd, kSub, kMul, kAffine, kRelu, kClamp01, kLinear, kTconvUp2,
    kCrop, kWarp, kAvgPool2, kStackCols, kCol, kGatherContexts, kSteRound,
    kLaplaceRate, kSum, kMse,
  };

  struct Node {
    Op op;
    std::vector<int> in;
    Tensor<T> val;
    Tensor<T> grad;
    int p0 = 0;    // op-specific: column index, ...
    T f0 = T(0);   // op-specific: affine scale, pool factor, ...
  };

  std::vector<Node> nodes_;
  MacBreakdown macs_;
  MacStage stage_ = MacStage::kNone;
  bool ran_backward_ = false;

  Node& node(int id) {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
      throw std::logic_error("tape: node id out of range");
    return nodes_[id];
  }
  const Node& node(int id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size())
      throw std::logic_error("tape: node id out of range");
    return nodes_[id];
  }
  const Tensor<T>& val(int id) const { return node(id).val; }

  int push(Op op, std::vector<int> in, Tensor<T> out) {
    for (int id : in) node(id);  // validate
    Node nd;
    nd.op = op;
    nd.in = std::move(in);
    nd.val = std::move(out);
    nodes_.push_back(std::move(nd));
    return static_cast<int>(nodes_.size()) - 1;
  }

  static void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.rows != b.rows || a.cols != b.cols)
      throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }

  void count_macs(uint64_t n) {
    switch (stage_) {
      case MacStage::kNone: break;
      case MacStage::kArm: macs_.arm += n; break;
      case MacStage::kUpsampling: macs_.upsampling += n; break;
      case MacStage::kSynthesis: macs_.synthesis += n; break;
      case MacStage::kInter: macs_.inter += n; break;
      case MacStage::kChroma: macs_.chroma += n; break;
    }
  }

  void backward_node(int id) {
    Node& nd = nodes_[id];
    const Tensor<T>& g = nd.grad;
    bool any = false;
    for (T x : g.v)
      if (x != T(0)) { any = true; break; }
    if (!any && nd.op != Op::kLeaf) return;

    switch (nd.op) {
      case Op::kLeaf:
        break;
      case Op::kAdd: {
        accum(nd.in[0], g.v.data(), g.v.size());
        accum(nd.in[1], g.v.data(), g.v.size());
        break;
      }
      case Op::kSub: {
        accum(nd.in[0], g.v.data(), g.v.size());
        Tensor<T>& gb = nodes_[nd.in[1]].grad;
        for (size_t i = 0; i < g.v.size(); ++i) gb.v[i] -= g.v[i];
        break;
      }
      case Op::kMul: {
        const auto& a = nodes_[nd.in[0]].val;
        const auto& b = nodes_[nd.in[1]].val;
        Tensor<T>& ga = nodes_[nd.in[0]].grad;
        Tensor<T>& gb = nodes_[nd.in[1]].grad;
        for (size_t i = 0; i < g.v.size(); ++i) {
          ga.v[i] += g.v[i] * b.v[i];
          gb.v[i] += g.v[i] * a.v[i];
        }
        break;
      }
      case Op::kAffine: {
        Tensor<T>& ga = nodes_[nd.in[0]].grad;
        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] += g.v[i] * nd.f0;
        break;
      }
      case Op::kRelu: {
        const auto& x = nodes_[nd.in[0]].val;
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        // subgradient at exactly 0 is 0
        for (size_t i = 0; i < g.v.size(); ++i)
          if (x.v[i] > T(0)) gx.v[i] += g.v[i];
        break;
      }
      case Op::kClamp01: {
        const auto& x = nodes_[nd.in[0]].val;
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        for (size_t i = 0; i < g.v.size(); ++i)
          if (x.v[i] > T(0) && x.v[i] < T(1)) gx.v[i] += g.v[i];
        break;
      }
      case Op::kLinear: {
        const auto& x = nodes_[nd.in[0]].val;
        const auto& w = nodes_[nd.in[1]].val;
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        Tensor<T>& gw = nodes_[nd.in[1]].grad;
        Tensor<T>& gb = nodes_[nd.in[2]].grad;
        const int n = x.rows, in_w = x.cols, out_w = w.rows;
        for (int r = 0; r < n; ++r) {
          const T* gr = &g.v[static_cast<size_t>(r) * out_w];
          const T* xr = &x.v[static_cast<size_t>(r) * in_w];
          T* gxr = &gx.v[static_cast<size_t>(r) * in_w];
          for (int o = 0; o < out_w; ++o) {
            const T go = gr[o];
            if (go == T(0)) continue;
            const T* wr = &w.v[static_cast<size_t>(o) * in_w];
            T* gwr = &gw.v[static_cast<size_t>(o) * in_w];
            for (int i = 0; i < in_w; ++i) {
              gxr[i] += go * wr[i];
              gwr[i] += go * xr[i];
            }
            gb.v[o] += go;
          }
        }
        break;
      }
      case Op::kTconvUp2: {
        const auto& x = nodes_[nd.in[0]].val;
        const auto& k = nodes_[nd.in[1]].val;
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        Tensor<T>& gk = nodes_[nd.in[1]].grad;
        const int h = x.rows, w = x.cols;
        const int oh = 2 * h, ow = 2 * w;
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < w; ++j) {
            const T xv = x.at(i, j);
            T acc = T(0);
            for (int u = 0; u < 8; ++u) {
              const int y = 2 * i + u - 3;
              if (y < 0 || y >= oh) continue;
              for (int vv = 0; vv < 8; ++vv) {
                const int xo = 2 * j + vv - 3;
                if (xo < 0 || xo >= ow) continue;
                const T gy = g.at(y, xo);
                acc += gy * k.at(u, vv);
                gk.at(u, vv) += gy * xv;
              }
            }
            gx.at(i, j) += acc;
          }
        }
        break;
      }
      case Op::kCrop: {
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        for (int r = 0; r < nd.val.rows; ++r)
          for (int c = 0; c < nd.val.cols; ++c) gx.at(r, c) += g.at(r, c);
        break;
      }
      case Op::kWarp: {
        const auto& ref = nodes_[nd.in[0]].val;
        const auto& fx = nodes_[nd.in[1]].val;
        const auto& fy = nodes_[nd.in[2]].val;
        Tensor<T>& gref = nodes_[nd.in[0]].grad;
        Tensor<T>& gfx = nodes_[nd.in[1]].grad;
        Tensor<T>& gfy = nodes_[nd.in[2]].grad;
        const int h = ref.rows, w = ref.cols;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            const T go = g.at(y, x);
            if (go == T(0)) continue;
            T sx = T(x) + fx.at(y, x);
            T sy = T(y) + fy.at(y, x);
            const bool in_x = sx > T(0) && sx < T(w - 1);
            const bool in_y = sy > T(0) && sy < T(h - 1);
            if (sx < T(0)) sx = T(0);
            if (sx > T(w - 1)) sx = T(w - 1);
            if (sy < T(0)) sy = T(0);
            if (sy > T(h - 1)) sy = T(h - 1);
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = x0 + 1 < w ? x0 + 1 : w - 1;
            const int y1 = y0 + 1 < h ? y0 + 1 : h - 1;
            const T ax = sx - T(x0);
            const T ay = sy - T(y0);
            gref.at(y0, x0) += go * (T(1) - ax) * (T(1) - ay);
            gref.at(y0, x1) += go * ax * (T(1) - ay);
            gref.at(y1, x0) += go * (T(1) - ax) * ay;
            gref.at(y1, x1) += go * ax * ay;
            // d(out)/d(sample coordinate); zero where the clamp is active
            if (in_x) {
              const T dx = (T(1) - ay) * (ref.at(y0, x1) - ref.at(y0, x0)) +
                           ay * (ref.at(y1, x1) - ref.at(y1, x0));
              gfx.at(y, x) += go * dx;
            }
            if (in_y) {
              const T dy = (T(1) - ax) * (ref.at(y1, x0) - ref.at(y0, x0)) +
                           ax * (ref.at(y1, x1) - ref.at(y0, x1));
              gfy.at(y, x) += go * dy;
            }
          }
        }
        break;
      }
      case Op::kAvgPool2: {
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        const int oh = nd.val.rows, ow = nd.val.cols;
        for (int r = 0; r < oh; ++r) {
          for (int c = 0; c < ow; ++c) {
            const T gf = g.at(r, c) * nd.f0;
            gx.at(2 * r, 2 * c) += gf;
            gx.at(2 * r, 2 * c + 1) += gf;
            gx.at(2 * r + 1, 2 * c) += gf;
            gx.at(2 * r + 1, 2 * c + 1) += gf;
          }
        }
        break;
      }
      case Op::kStackCols: {
        const int k = nd.val.cols;
        for (int j = 0; j < k; ++j) {
          Tensor<T>& gj = nodes_[nd.in[j]].grad;
          for (int r = 0; r < nd.val.rows; ++r)
            gj.v[r] += g.v[static_cast<size_t>(r) * k + j];
        }
        break;
      }
      case Op::kCol: {
        Tensor<T>& gm = nodes_[nd.in[0]].grad;
        const int k = nodes_[nd.in[0]].val.cols;
        for (size_t r = 0; r < g.v.size(); ++r)
          gm.v[r * k + nd.p0] += g.v[r];
        break;
      }
      case Op::kGatherContexts: {
        Tensor<T>& gp = nodes_[nd.in[0]].grad;
        const int h = gp.rows, w = gp.cols;
        size_t n = 0;
        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c, ++n) {
            const T* grow = &g.v[n * kArmContextSize];
            for (int kk = 0; kk < kArmContextSize; ++kk) {
              const int rr = r + kArmContextOffsets[kk].first;
              const int cc = c + kArmContextOffsets[kk].second;
              if (rr >= 0 && rr < h && cc >= 0 && cc < w) gp.at(rr, cc) += grow[kk];
            }
          }
        }
        break;
      }
      case Op::kSteRound: {
        accum(nd.in[0], g.v.data(), g.v.size());
        break;
      }
      case Op::kLaplaceRate: {
        const auto& mu = nodes_[nd.in[0]].val;
        const auto& raw = nodes_[nd.in[1]].val;
        const auto& x = nodes_[nd.in[2]].val;
        Tensor<T>& gmu = nodes_[nd.in[0]].grad;
        Tensor<T>& graw = nodes_[nd.in[1]].grad;
        Tensor<T>& gx = nodes_[nd.in[2]].grad;
        const T inv_ln2 = T(1) / std::log(T(2));
        for (size_t i = 0; i < x.v.size(); ++i) {
          const T go = g.v[i];
          if (go == T(0)) continue;
          T lb = raw.v[i];
          const bool clamped = lb <= T(-kLogScaleClamp) || lb >= T(kLogScaleClamp);
          if (lb < T(-kLogScaleClamp)) lb = T(-kLogScaleClamp);
          if (lb > T(kLogScaleClamp)) lb = T(kLogScaleClamp);
          const T b = std::exp(lb);
          const T c = x.v[i] + T(0.5) - mu.v[i];
          const T a = x.v[i] - T(0.5) - mu.v[i];
          const T fc = laplace_cdf(c, T(0), b);
          const T fa = laplace_cdf(a, T(0), b);
          const T p = fc - fa;
          if (p <= T(kRateProbFloor)) continue;  // floored: zero gradient
          const T pdf_c = std::exp(-std::abs(c) / b) / (T(2) * b);
          const T pdf_a = std::exp(-std::abs(a) / b) / (T(2) * b);
          const T drate_dp = -inv_ln2 / p;
          const T dp_dx = pdf_c - pdf_a;
          const T dp_dmu = -dp_dx;
          const T dp_db = (-c * pdf_c + a * pdf_a) / b;
          gx.v[i] += go * drate_dp * dp_dx;
          gmu.v[i] += go * drate_dp * dp_dmu;
          if (!clamped) graw.v[i] += go * drate_dp * dp_db * b;  // db/draw = b
        }
        break;
      }
      case Op::kSum: {
        Tensor<T>& gx = nodes_[nd.in[0]].grad;
        const T go = g.v[0];
        for (auto& x : gx.v) x += go;
        break;
      }
      case Op::kMse: {
        const auto& a = nodes_[nd.in[0]].val;
        const auto& b = nodes_[nd.in[1]].val;
        Tensor<T>& ga = nodes_[nd.in[0]].grad;
        Tensor<T>& gb = nodes_[nd.in[1]].grad;
        const T go = g.v[0] * T(2) / T(a.v.size());
        for (size_t i = 0; i < a.v.size(); ++i) {
          const T d = go * (a.v[i] - b.v[i]);
          ga.v[i] += d;
          gb.v[i] -= d;
        }
        break;
      }
    }
  }

  void accum(int id, const T* g, size_t n) {
    Tensor<T>& dst = nodes_[id].grad;
    for (size_t i = 0; i < n; ++i) dst.v[i] += g[i];
  }
};

using TensorF = Tensor<float>;
using TapeF = Tape<float>;

}  // namespace ccv
