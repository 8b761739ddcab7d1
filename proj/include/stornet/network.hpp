#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <queue>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stornet/errors.hpp"

namespace stornet {

/// Default feasibility tolerance for flow checks; no stricter than the LP
/// solver's optimality tolerance so solver output always passes.
inline constexpr double kFlowTol = 1e-8;

/// Directed graph with per-line admittance and capacity. Under the DC
/// approximation a flow vector is realizable iff it satisfies the capacity
/// box and k_matrix * f = 0, where the rows of k_matrix form an orthonormal
/// basis of the nullspace of (diag(beta) * incidence)^T.
class PowerNetwork {
public:
  static PowerNetwork build(int num_buses, const std::vector<std::pair<int, int>>& edges,
                            const std::vector<double>& beta, const std::vector<double>& f_max) {
    if (num_buses < 1) {
      throw NetworkError(NetworkError::Code::empty, "network needs at least one bus");
    }
    const int m = static_cast<int>(edges.size());
    if (beta.size() != edges.size() || f_max.size() != edges.size()) {
      throw NetworkError(NetworkError::Code::dimension,
                         "edges, beta and f_max must have matching lengths");
    }
    for (int e = 0; e < m; ++e) {
      const auto [a, b] = edges[e];
      std::ostringstream msg;
      if (a < 0 || a >= num_buses || b < 0 || b >= num_buses) {
        msg << "edge " << e << " references unknown bus (" << a << ", " << b << ")";
        throw NetworkError(NetworkError::Code::unknown_bus, msg.str());
      }
      if (a == b) {
        msg << "edge " << e << " is a self-loop on bus " << a;
        throw NetworkError(NetworkError::Code::self_loop, msg.str());
      }
      if (!(beta[e] > 0.0)) {
        msg << "edge " << e << " has nonpositive admittance " << beta[e];
        throw NetworkError(NetworkError::Code::bad_admittance, msg.str());
      }
      if (!(f_max[e] >= 0.0)) {
        msg << "edge " << e << " has negative capacity " << f_max[e];
        throw NetworkError(NetworkError::Code::bad_capacity, msg.str());
      }
    }
    check_connected(num_buses, edges);

    PowerNetwork net;
    net.n_ = num_buses;
    net.edges_ = edges;
    net.beta_ = Eigen::Map<const Eigen::VectorXd>(beta.data(), m);
    net.f_max_ = Eigen::Map<const Eigen::VectorXd>(f_max.data(), m);

    // Incidence: +1 at the from-bus column, -1 at the to-bus column.
    net.incidence_ = Eigen::MatrixXd::Zero(m, num_buses);
    for (int e = 0; e < m; ++e) {
      net.incidence_(e, edges[e].first) += 1.0;
      net.incidence_(e, edges[e].second) -= 1.0;
    }

    if (m == 0) {
      net.k_matrix_.resize(0, 0);
      return net;
    }

    const Eigen::MatrixXd h = net.beta_.asDiagonal() * net.incidence_;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU);
    const double sigma_max = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    const double rank_tol = 1e-12 * std::max(1.0, sigma_max) * std::max(m, num_buses);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i) {
      if (svd.singularValues()(i) > rank_tol) ++rank;
    }
    if (rank != num_buses - 1) {
      std::ostringstream msg;
      msg << "flow matrix rank " << rank << " != n-1 = " << num_buses - 1;
      throw NetworkError(NetworkError::Code::disconnected, msg.str());
    }

    // Trailing left singular vectors span the orthogonal complement of the
    // realizable-flow subspace. Canonicalize each row's sign (first entry of
    // meaningful magnitude made positive) so serialized networks round-trip
    // bit-exactly.
    const int k_rows = m - rank;
    net.k_matrix_ = svd.matrixU().rightCols(k_rows).transpose();
    for (int r = 0; r < k_rows; ++r) {
      for (int c = 0; c < m; ++c) {
        const double v = net.k_matrix_(r, c);
        if (std::abs(v) > 1e-9) {
          if (v < 0.0) net.k_matrix_.row(r) *= -1.0;
          break;
        }
      }
    }
    return net;
  }

  int num_buses() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const Eigen::VectorXd& beta() const { return beta_; }
  const Eigen::VectorXd& f_max() const { return f_max_; }
  const Eigen::MatrixXd& incidence() const { return incidence_; }
  const Eigen::MatrixXd& k_matrix() const { return k_matrix_; }

  bool flow_feasible(const Eigen::VectorXd& f, double tol = kFlowTol) const {
    if (f.size() != num_edges()) {
      throw NetworkError(NetworkError::Code::dimension, "flow vector length mismatch");
    }
    for (int e = 0; e < num_edges(); ++e) {
      if (std::abs(f(e)) > f_max_(e) + tol) return false;
    }
    if (k_matrix_.rows() > 0 && (k_matrix_ * f).lpNorm<Eigen::Infinity>() > tol) return false;
    return true;
  }

  /// Net energy flowing into a bus: inbound edge flows minus outbound.
  double net_inflow(const Eigen::VectorXd& f, int bus) const {
    if (f.size() != num_edges()) {
      throw NetworkError(NetworkError::Code::dimension, "flow vector length mismatch");
    }
    if (bus < 0 || bus >= n_) {
      std::ostringstream msg;
      msg << "unknown bus " << bus;
      throw NetworkError(NetworkError::Code::unknown_bus, msg.str());
    }
    return -incidence_.col(bus).dot(f);
  }

private:
  static void check_connected(int n, const std::vector<std::pair<int, int>>& edges) {
    std::vector<std::vector<int>> adj(n);
    for (const auto& [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = 1;
    int count = 1;
    while (!frontier.empty()) {
      const int v = frontier.front();
      frontier.pop();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          frontier.push(w);
        }
      }
    }
    if (count != n) {
      throw NetworkError(NetworkError::Code::disconnected, "graph is not connected");
    }
  }

  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd f_max_;
  Eigen::MatrixXd incidence_;
  Eigen::MatrixXd k_matrix_;
};

}  // namespace stornet
