#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cgc/errors.hpp"
#include "cgc/matrix.hpp"
#include "cgc/rng.hpp"

namespace cgc::ad {

// One record of the computation graph. Nodes are created through Tape ops in
// forward order, which is also a topological order, so backward() can replay
// them in reverse exactly once without an explicit sort.
struct Node {
  const char* op;
  std::size_t id = 0;  // creation index within the owning tape
  Mat value;
  Mat grad;                              // allocated/zeroed by backward()
  std::vector<Node*> inputs;             // upstream nodes; empty for leaves
  std::function<void(Node&)> recompute;  // refreshes value from inputs; empty for leaves
  std::function<void(Node&)> backprop;   // empty for constants
  Mat* sink = nullptr;                   // parameter leaves accumulate here

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
};

// Owns the nodes of one forward/backward pass. A tape is single-threaded;
// independent tapes reading shared parameter values may run concurrently as
// long as their gradient sinks are distinct.
class Tape {
 public:
  Node* constant(Mat value, const char* op = "const");

  // Leaf whose gradient is accumulated (+=) into `sink` on backward(). Pass
  // nullptr when gradients are not wanted (inference-only forwards).
  Node* param(const Mat& value, Mat* sink);

  Node* matmul(Node* a, Node* b);
  Node* add(Node* a, Node* b);
  Node* sub(Node* a, Node* b);
  Node* mul(Node* a, Node* b);         // elementwise
  Node* add_rowvec(Node* x, Node* b);  // b is 1xC, broadcast over rows
  Node* relu(Node* x);                 // derivative 0 at ties
  Node* sigmoid(Node* x);
  Node* tanh(Node* x);
  Node* softmax_rows(Node* x);   // max-shifted per row
  Node* max_over_rows(Node* x);  // 1xC column-wise max; grad to first argmax
  Node* concat_cols(const std::vector<Node*>& xs);
  Node* transpose(Node* x);
  Node* scale(Node* x, double c);
  Node* scale_rows(Node* x, Node* s);  // s is Nx1; row i of x scaled by s(i)
  Node* col(Node* x, Eigen::Index j);  // Nx1 column slice
  Node* block_cols(Node* x, Eigen::Index j0, Eigen::Index w);  // columns [j0, j0+w)
  // Inverted dropout: zeroed entries, survivors scaled by 1/(1-rate). Identity
  // when rate == 0 or not training. Mask draws consume rng in row-major order.
  Node* dropout(Node* x, double rate, bool training, Rng& rng);
  // -log softmax(logits)[label] via the log-sum-exp form; logits are 1xC.
  Node* cross_entropy_logits(Node* logits, int label);
  // Row-stochastic re-weighting of a nonnegative square matrix: off-diagonal
  // entries share mass p in proportion to their weight, the diagonal gets
  // 1-p. A row with no off-diagonal mass becomes an identity row.
  Node* reweight_rows(Node* a, double p);
  Node* sum_all(Node* x);

  // Reverse-mode sweep from a 1x1 loss. Node gradients are rebuilt from
  // scratch each call; parameter sinks accumulate, so calling twice adds the
  // same gradients twice.
  void backward(Node* loss);

  // Flags, in creation order, every node whose value depends on `src`
  // (including src itself). Input to revalue().
  std::vector<char> downstream_mask(const Node* src) const;

  // Recomputes the values of flagged non-leaf nodes in creation order,
  // leaving the rest cached. Callers mutate leaf values in place (e.g.
  // finite-difference probes) and pass the leaf's downstream mask; the
  // refreshed values match a fresh forward pass bit for bit. Stochastic ops
  // keep their recorded draws (dropout masks are frozen), and gradients are
  // untouched. Skips the finite-value check that node creation performs.
  void revalue(const std::vector<char>& mask);

  std::size_t size() const { return nodes_.size(); }
  Node* at(std::size_t i) { return nodes_.at(i).get(); }
  void reset() { nodes_.clear(); }

 private:
  Node* leaf(const char* op, Mat value);
  Node* emplace(const char* op, std::vector<Node*> inputs,
                std::function<void(Node&)> fwd, std::function<void(Node&)> backprop);
  std::vector<std::unique_ptr<Node>> nodes_;
};

}  // namespace cgc::ad
