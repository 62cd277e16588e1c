#include "cgc/autodiff.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace cgc::ad {

namespace {

void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw DimensionError(std::string(op) + ": " + what);
}

}  // namespace

Node* Tape::leaf(const char* op, Mat value) {
  if (!value.allFinite())
    throw NumericError(std::string(op) + ": produced non-finite values");
  auto node = std::make_unique<Node>();
  node->op = op;
  node->id = nodes_.size();
  node->value = std::move(value);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Tape::emplace(const char* op, std::vector<Node*> inputs,
                    std::function<void(Node&)> fwd, std::function<void(Node&)> backprop) {
  auto node = std::make_unique<Node>();
  node->op = op;
  node->id = nodes_.size();
  node->inputs = std::move(inputs);
  fwd(*node);
  if (!node->value.allFinite())
    throw NumericError(std::string(op) + ": produced non-finite values");
  node->recompute = std::move(fwd);
  node->backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return nodes_.back().get();
}

Node* Tape::constant(Mat value, const char* op) { return leaf(op, std::move(value)); }

Node* Tape::param(const Mat& value, Mat* sink) {
  Node* n = leaf("param", value);
  n->sink = sink;
  if (sink) {
    if (sink->rows() != value.rows() || sink->cols() != value.cols())
      throw DimensionError("param: gradient sink shape mismatch");
    n->backprop = [](Node& self) { *self.sink += self.grad; };
  }
  return n;
}

Node* Tape::matmul(Node* a, Node* b) {
  require(a->cols() == b->rows(), "matmul", "inner dimensions disagree");
  return emplace(
      "matmul", {a, b},
      [a, b](Node& out) { out.value.noalias() = a->value * b->value; },
      [a, b](Node& out) {
        a->grad.noalias() += out.grad * b->value.transpose();
        b->grad.noalias() += a->value.transpose() * out.grad;
      });
}

Node* Tape::add(Node* a, Node* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "add", "shape mismatch");
  return emplace(
      "add", {a, b}, [a, b](Node& out) { out.value = a->value + b->value; },
      [a, b](Node& out) {
        a->grad += out.grad;
        b->grad += out.grad;
      });
}

Node* Tape::sub(Node* a, Node* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "sub", "shape mismatch");
  return emplace(
      "sub", {a, b}, [a, b](Node& out) { out.value = a->value - b->value; },
      [a, b](Node& out) {
        a->grad += out.grad;
        b->grad -= out.grad;
      });
}

Node* Tape::mul(Node* a, Node* b) {
  require(a->rows() == b->rows() && a->cols() == b->cols(), "mul", "shape mismatch");
  return emplace(
      "mul", {a, b}, [a, b](Node& out) { out.value = a->value.cwiseProduct(b->value); },
      [a, b](Node& out) {
        a->grad.array() += out.grad.array() * b->value.array();
        b->grad.array() += out.grad.array() * a->value.array();
      });
}

Node* Tape::add_rowvec(Node* x, Node* b) {
  require(b->rows() == 1 && b->cols() == x->cols(), "add_rowvec", "bias must be 1 x cols(x)");
  return emplace(
      "add_rowvec", {x, b},
      [x, b](Node& out) {
        out.value = x->value;
        out.value.rowwise() += b->value.row(0);
      },
      [x, b](Node& out) {
        x->grad += out.grad;
        b->grad += out.grad.colwise().sum();
      });
}

Node* Tape::relu(Node* x) {
  return emplace(
      "relu", {x}, [x](Node& out) { out.value = x->value.cwiseMax(0.0); },
      [x](Node& out) {
        x->grad.array() += (x->value.array() > 0.0).cast<double>() * out.grad.array();
      });
}

Node* Tape::sigmoid(Node* x) {
  // tanh form keeps exp() off the overflow path for large |x|
  return emplace(
      "sigmoid", {x},
      [x](Node& out) { out.value = ((x->value.array() * 0.5).tanh() * 0.5 + 0.5).matrix(); },
      [x](Node& out) {
        x->grad.array() += out.grad.array() * out.value.array() * (1.0 - out.value.array());
      });
}

Node* Tape::tanh(Node* x) {
  return emplace(
      "tanh", {x}, [x](Node& out) { out.value = x->value.array().tanh().matrix(); },
      [x](Node& out) {
        x->grad.array() += out.grad.array() * (1.0 - out.value.array().square());
      });
}

Node* Tape::softmax_rows(Node* x) {
  require(x->rows() > 0 && x->cols() > 0, "softmax_rows", "empty input");
  return emplace(
      "softmax_rows", {x},
      [x](Node& out) {
        Eigen::ArrayXd rowmax = x->value.rowwise().maxCoeff();
        Mat e = (x->value.array().colwise() - rowmax).exp().matrix();
        Eigen::ArrayXd rowsum = e.rowwise().sum();
        out.value = (e.array().colwise() / rowsum).matrix();
      },
      [x](Node& out) {
        // dx = y * (g - <g, y>_row)
        Eigen::ArrayXd dots = (out.grad.array() * out.value.array()).rowwise().sum();
        x->grad.array() += out.value.array() * (out.grad.array().colwise() - dots);
      });
}

Node* Tape::max_over_rows(Node* x) {
  require(x->rows() > 0, "max_over_rows", "empty graph: no rows to reduce");
  auto argmax = std::make_shared<std::vector<Eigen::Index>>();
  return emplace(
      "max_over_rows", {x},
      [x, argmax](Node& out) {
        const Eigen::Index c = x->cols();
        out.value.resize(1, c);
        argmax->assign(c, 0);
        for (Eigen::Index j = 0; j < c; ++j) {
          Eigen::Index best = 0;
          for (Eigen::Index i = 1; i < x->rows(); ++i)
            if (x->value(i, j) > x->value(best, j)) best = i;
          (*argmax)[j] = best;
          out.value(0, j) = x->value(best, j);
        }
      },
      [x, argmax](Node& out) {
        for (Eigen::Index j = 0; j < out.cols(); ++j)
          x->grad((*argmax)[j], j) += out.grad(0, j);
      });
}

Node* Tape::concat_cols(const std::vector<Node*>& xs) {
  require(!xs.empty(), "concat_cols", "nothing to concatenate");
  const Eigen::Index r = xs[0]->rows();
  Eigen::Index total = 0;
  for (Node* x : xs) {
    require(x->rows() == r, "concat_cols", "row counts disagree");
    total += x->cols();
  }
  auto parts = std::make_shared<std::vector<Node*>>(xs);
  return emplace(
      "concat_cols", xs,
      [parts, r, total](Node& out) {
        out.value.resize(r, total);
        Eigen::Index off = 0;
        for (Node* x : *parts) {
          out.value.middleCols(off, x->cols()) = x->value;
          off += x->cols();
        }
      },
      [parts](Node& out) {
        Eigen::Index off = 0;
        for (Node* x : *parts) {
          x->grad += out.grad.middleCols(off, x->cols());
          off += x->cols();
        }
      });
}

Node* Tape::transpose(Node* x) {
  return emplace(
      "transpose", {x}, [x](Node& out) { out.value = x->value.transpose(); },
      [x](Node& out) { x->grad += out.grad.transpose(); });
}

Node* Tape::scale(Node* x, double c) {
  return emplace(
      "scale", {x}, [x, c](Node& out) { out.value = x->value * c; },
      [x, c](Node& out) { x->grad += out.grad * c; });
}

Node* Tape::scale_rows(Node* x, Node* s) {
  require(s->cols() == 1 && s->rows() == x->rows(), "scale_rows", "scales must be rows(x) x 1");
  return emplace(
      "scale_rows", {x, s},
      [x, s](Node& out) {
        out.value = (x->value.array().colwise() * s->value.col(0).array()).matrix();
      },
      [x, s](Node& out) {
        x->grad.array() += out.grad.array().colwise() * s->value.col(0).array();
        s->grad.col(0).array() += (out.grad.array() * x->value.array()).rowwise().sum();
      });
}

Node* Tape::col(Node* x, Eigen::Index j) {
  require(j >= 0 && j < x->cols(), "col", "column index out of range");
  return emplace(
      "col", {x}, [x, j](Node& out) { out.value = x->value.col(j); },
      [x, j](Node& out) { x->grad.col(j) += out.grad; });
}

Node* Tape::block_cols(Node* x, Eigen::Index j0, Eigen::Index w) {
  require(j0 >= 0 && w >= 1 && j0 + w <= x->cols(), "block_cols",
          "column range out of bounds");
  return emplace(
      "block_cols", {x},
      [x, j0, w](Node& out) { out.value = x->value.middleCols(j0, w); },
      [x, j0, w](Node& out) { x->grad.middleCols(j0, w) += out.grad; });
}

Node* Tape::dropout(Node* x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<Mat>(x->rows(), x->cols());
  for (Eigen::Index i = 0; i < x->rows(); ++i)
    for (Eigen::Index j = 0; j < x->cols(); ++j)
      (*mask)(i, j) = rng.uniform() >= rate ? keep_scale : 0.0;
  return emplace(
      "dropout", {x},
      [x, mask](Node& out) { out.value = x->value.cwiseProduct(*mask); },
      [x, mask](Node& out) { x->grad.array() += out.grad.array() * mask->array(); });
}

Node* Tape::cross_entropy_logits(Node* logits, int label) {
  require(logits->rows() == 1, "cross_entropy_logits", "logits must be a single row");
  if (label < 0 || label >= logits->cols())
    throw Error("cross_entropy_logits: label out of range");
  auto probs = std::make_shared<Eigen::ArrayXd>();
  return emplace(
      "cross_entropy_logits", {logits},
      [logits, label, probs](Node& out) {
        const double m = logits->value.maxCoeff();
        Eigen::ArrayXd shifted = logits->value.row(0).transpose().array() - m;
        const double lse = m + std::log(shifted.exp().sum());
        out.value.resize(1, 1);
        out.value(0, 0) = lse - logits->value(0, label);
        *probs = (shifted - (lse - m)).exp();
      },
      [logits, label, probs](Node& out) {
        const double g = out.grad(0, 0);
        logits->grad.row(0).array() += g * (*probs).transpose();
        logits->grad(0, label) -= g;
      });
}

Node* Tape::reweight_rows(Node* a, double p) {
  require(a->rows() == a->cols(), "reweight_rows", "matrix must be square");
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("reweight_rows: p must be in [0, 1)");
  auto offmass = std::make_shared<Eigen::ArrayXd>();
  return emplace(
      "reweight_rows", {a},
      [a, p, offmass](Node& out) {
        const Eigen::Index n = a->rows();
        offmass->resize(n);
        out.value = Mat::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          double off = a->value.row(i).sum() - a->value(i, i);
          (*offmass)(i) = off;
          if (off > 0.0) {
            out.value.row(i) = (p / off) * a->value.row(i);
            out.value(i, i) = 1.0 - p;
          } else {
            out.value(i, i) = 1.0;  // isolated node keeps only itself
          }
        }
      },
      [a, p, offmass](Node& out) {
        const Eigen::Index n = out.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
          const double off = (*offmass)(i);
          if (off <= 0.0) continue;  // value is constant in a for isolated rows
          double gdota = 0.0;
          for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) gdota += out.grad(i, j) * a->value(i, j);
          const double c = p * gdota / (off * off);
          for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;  // diagonal input entry never contributes
            a->grad(i, j) += p * out.grad(i, j) / off - c;
          }
        }
      });
}

Node* Tape::sum_all(Node* x) {
  return emplace(
      "sum_all", {x},
      [x](Node& out) {
        out.value.resize(1, 1);
        out.value(0, 0) = x->value.sum();
      },
      [x](Node& out) { x->grad.array() += out.grad(0, 0); });
}

void Tape::backward(Node* loss) {
  if (loss->rows() != 1 || loss->cols() != 1)
    throw DimensionError("backward: loss must be 1x1");
  for (auto& n : nodes_)
    n->grad = Mat::Zero(n->value.rows(), n->value.cols());
  loss->grad(0, 0) = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (n.backprop && n.grad.size() > 0) n.backprop(n);
  }
}

std::vector<char> Tape::downstream_mask(const Node* src) const {
  std::vector<char> mask(nodes_.size(), 0);
  if (src->id >= nodes_.size() || nodes_[src->id].get() != src)
    throw Error("downstream_mask: node does not belong to this tape");
  mask[src->id] = 1;
  for (std::size_t i = src->id + 1; i < nodes_.size(); ++i)
    for (const Node* in : nodes_[i]->inputs)
      if (mask[in->id]) {
        mask[i] = 1;
        break;
      }
  return mask;
}

void Tape::revalue(const std::vector<char>& mask) {
  if (mask.size() != nodes_.size())
    throw DimensionError("revalue: mask length must equal tape size");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = *nodes_[i];
    if (mask[i] && n.recompute) n.recompute(n);
  }
}

}  // namespace cgc::ad
