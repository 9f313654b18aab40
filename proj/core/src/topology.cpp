#include "mtnetopt/topology.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mtnetopt {

int Topology::link_index(int link_id) const {
  for (std::size_t k = 0; k < links.size(); ++k)
    if (links[k].id == link_id) return static_cast<int>(k);
  throw std::invalid_argument("unknown link id " + std::to_string(link_id));
}

int Topology::flow_index(int flow_id) const {
  for (std::size_t i = 0; i < flows.size(); ++i)
    if (flows[i].id == flow_id) return static_cast<int>(i);
  throw std::invalid_argument("unknown flow id " + std::to_string(flow_id));
}

const Node& Topology::node(int node_id) const {
  for (const Node& n : nodes)
    if (n.id == node_id) return n;
  throw std::invalid_argument("unknown node id " + std::to_string(node_id));
}

void Topology::finalize() {
  l_plus.clear();
  l_minus.clear();
  routes.clear();
  for (const Link& l : links) {
    node(l.tx);
    node(l.rx);
    l_plus[l.rx].insert(l.id);
    l_minus[l.tx].insert(l.id);
  }
  for (const Link& l : links) routes[l.id];  // ensure every link is present
  for (const Flow& f : flows) {
    if (f.path.empty())
      throw std::invalid_argument("flow " + std::to_string(f.id) + " has empty path");
    int at = f.source;
    for (int lid : f.path) {
      const Link& l = links[link_index(lid)];
      if (l.tx != at)
        throw std::invalid_argument("flow " + std::to_string(f.id) +
                                    ": path is not a connected directed path");
      at = l.rx;
      routes[lid].insert(f.id);
    }
    if (at != 0)
      throw std::invalid_argument("flow " + std::to_string(f.id) +
                                  " does not terminate at node 0");
  }
}

Topology Topology::fig1() {
  Topology t;
  t.nodes = {
      {0, NodeRole::Bs, {0.0, 0.0}, false},
      {1, NodeRole::User, {80.0, 60.0}, true},
      {2, NodeRole::User, {180.0, -80.0}, true},
      {3, NodeRole::User, {300.0, 40.0}, true},
      {4, NodeRole::User, {280.0, -70.0}, true},
      {5, NodeRole::Relay, {200.0, 0.0}, false},
      {6, NodeRole::Relay, {100.0, 0.0}, false},
  };
  t.links = {
      {1, 1, 0}, {2, 2, 6}, {3, 3, 5}, {4, 4, 5}, {5, 5, 6}, {6, 6, 0},
  };
  t.flows = {
      {1, 1, {1}},
      {2, 2, {2, 6}},
      {3, 3, {3, 5, 6}},
      {4, 4, {4, 5, 6}},
  };
  t.finalize();
  return t;
}

namespace {

NodeRole role_from_string(const std::string& s) {
  if (s == "bs") return NodeRole::Bs;
  if (s == "relay") return NodeRole::Relay;
  if (s == "user") return NodeRole::User;
  throw std::invalid_argument("unknown node role: " + s);
}

}  // namespace

Topology Topology::from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  Topology t;
  for (const auto& n : j.at("nodes")) {
    Node node;
    node.id = n.at("id").get<int>();
    node.role = role_from_string(n.at("role").get<std::string>());
    if (n.contains("position")) {
      node.position = {n["position"][0].get<double>(), n["position"][1].get<double>()};
    }
    node.mobile = n.value("mobile", false);
    t.nodes.push_back(node);
  }
  for (const auto& l : j.at("links")) {
    t.links.push_back({l.at("id").get<int>(), l.at("tx").get<int>(), l.at("rx").get<int>()});
  }
  for (const auto& f : j.at("flows")) {
    Flow flow;
    flow.id = f.at("id").get<int>();
    flow.source = f.at("source").get<int>();
    for (const auto& lid : f.at("path")) flow.path.push_back(lid.get<int>());
    t.flows.push_back(flow);
  }
  t.finalize();
  return t;
}

Topology Topology::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open topology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

Eigen::VectorXd link_rates(const Eigen::VectorXd& r, const Topology& topo) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(topo.links.size());
  for (std::size_t k = 0; k < topo.links.size(); ++k) {
    const auto it = topo.routes.find(topo.links[k].id);
    if (it == topo.routes.end()) continue;
    for (int fid : it->second) c[k] += r[topo.flow_index(fid)];
  }
  return c;
}

Eigen::VectorXd flow_balance_residual(const Eigen::VectorXd& r,
                                      const Topology& topo) {
  const Eigen::VectorXd c = link_rates(r, topo);
  std::vector<double> res;
  for (const Node& n : topo.nodes) {
    if (n.role != NodeRole::Relay) continue;
    double acc = 0.0;
    if (auto it = topo.l_plus.find(n.id); it != topo.l_plus.end())
      for (int lid : it->second) acc += c[topo.link_index(lid)];
    if (auto it = topo.l_minus.find(n.id); it != topo.l_minus.end())
      for (int lid : it->second) acc -= c[topo.link_index(lid)];
    res.push_back(acc);
  }
  return Eigen::Map<Eigen::VectorXd>(res.data(), res.size());
}

}  // namespace mtnetopt
