#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtnetopt/channel.hpp"

#include <Eigen/Dense>

namespace mtnetopt {

enum class NodeRole { Bs, Relay, User };

struct Node {
  int id = 0;
  NodeRole role = NodeRole::User;
  Vec2 position;
  bool mobile = false;
};

struct Link {
  int id = 0;
  int tx = 0;
  int rx = 0;
};

struct Flow {
  int id = 0;
  int source = 0;
  std::vector<int> path;  // ordered link ids, source -> BS (node 0)
};

/// Directed relay graph with route-based flow parameterization.
/// L_plus(m): links into node m. L_minus(m): links out of node m.
/// C(k): flows routed through link k.
struct Topology {
  std::vector<Node> nodes;
  std::vector<Link> links;
  std::vector<Flow> flows;

  std::map<int, std::set<int>> l_plus;
  std::map<int, std::set<int>> l_minus;
  std::map<int, std::set<int>> routes;  // link id -> flow ids

  std::size_t num_links() const { return links.size(); }
  std::size_t num_flows() const { return flows.size(); }

  int link_index(int link_id) const;
  int flow_index(int flow_id) const;
  const Node& node(int node_id) const;

  /// Builds the index maps and validates: every flow path must be a connected
  /// directed path from its source to node 0. Throws std::invalid_argument.
  void finalize();

  /// The six-link relay example: macro BS (node 0), relays 5 and 6, users 1-4.
  static Topology fig1();

  static Topology from_json_file(const std::string& path);
  static Topology from_json_text(const std::string& text);
};

/// Aggregate rate per link: c_k = sum_{j in C(k)} r_j.
Eigen::VectorXd link_rates(const Eigen::VectorXd& r, const Topology& topo);

/// Flow-balance residual per relay: sum of c over inbound minus outbound.
/// Identically zero under route-based rates; nonzero flags a corrupted table.
Eigen::VectorXd flow_balance_residual(const Eigen::VectorXd& r,
                                      const Topology& topo);

}  // namespace mtnetopt
