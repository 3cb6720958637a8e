#include "fireguard/noc.hpp"

#include <algorithm>
#include <cmath>

namespace fg {

namespace {

constexpr Port opposite(Port p) {
  switch (p) {
    case kNorth: return kSouth;
    case kSouth: return kNorth;
    case kEast: return kWest;
    case kWest: return kEast;
    default: return kLocal;
  }
}

}  // namespace

Mesh::Mesh(int width, int height, size_t port_depth)
    : width_(width), height_(height), depth_(port_depth) {
  if (width <= 0 || height <= 0) fail(ErrorKind::Config, "mesh dimensions must be positive");
  if (port_depth == 0) fail(ErrorKind::Config, "mesh port depth must be positive");
  routers_.resize(static_cast<size_t>(width * height));
  injecting_.resize(routers_.size());
}

std::pair<int, int> default_mesh_dims(unsigned engines) {
  if (engines == 0) return {1, 1};
  int w = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(engines))));
  int h = static_cast<int>((engines + w - 1) / w);
  return {w, h};
}

Port Mesh::route(int node, int dst) const {
  Coord c = coord(node);
  Coord d = coord(dst);
  if (d.x > c.x) return kEast;
  if (d.x < c.x) return kWest;
  if (d.y > c.y) return kSouth;
  if (d.y < c.y) return kNorth;
  return kLocal;
}

int Mesh::neighbor(int node, Port p) const {
  Coord c = coord(node);
  switch (p) {
    case kNorth: --c.y; break;
    case kSouth: ++c.y; break;
    case kEast: ++c.x; break;
    case kWest: --c.x; break;
    default: return node;
  }
  return node_at(c);
}

FabricPacket& Mesh::packet(uint64_t id) {
  auto it = std::lower_bound(packets_.begin(), packets_.end(), id,
                             [](const auto& e, uint64_t v) { return e.first < v; });
  return it->second;
}

void Mesh::erase_packet(uint64_t id) {
  auto it = std::lower_bound(packets_.begin(), packets_.end(), id,
                             [](const auto& e, uint64_t v) { return e.first < v; });
  packets_.erase(it);
}

size_t Mesh::flits_in_flight() const {
  size_t n = 0;
  for (const auto& r : routers_) {
    for (const auto& q : r.in) n += q.size();
  }
  for (const auto& inj : injecting_) {
    if (inj) n += inj->total - inj->sent;
  }
  return n;
}

void Mesh::step(MeshEndpoints& endpoints) {
  ++cycle_;
  const int n = nodes();
  std::vector<std::array<size_t, kNumPorts>> occ(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    for (unsigned p = 0; p < kNumPorts; ++p) occ[r][p] = routers_[r].in[p].size();
  }

  struct Move {
    int router;
    unsigned in;
    Port out;
  };
  std::vector<Move> moves;

  for (int r = 0; r < n; ++r) {
    Router& rt = routers_[r];
    std::array<bool, kNumPorts> input_used{};
    for (unsigned o = 0; o < kNumPorts; ++o) {
      const Port out = static_cast<Port>(o);
      int chosen = -1;
      if (rt.out_lock[o] >= 0) {
        unsigned i = static_cast<unsigned>(rt.out_lock[o]);
        if (!rt.in[i].empty() && !input_used[i]) chosen = static_cast<int>(i);
      } else {
        for (unsigned k = 0; k < kNumPorts; ++k) {
          unsigned i = (rt.rr[o] + k) % kNumPorts;
          if (input_used[i] || rt.in[i].empty()) continue;
          const Flit& f = rt.in[i].front();
          if (!f.head || route(r, f.dst) != out) continue;
          chosen = static_cast<int>(i);
          break;
        }
      }
      if (chosen < 0) continue;
      const Flit& f = rt.in[chosen].front();
      bool room;
      if (out == kLocal) {
        room = !f.head || endpoints.can_accept(r);
      } else {
        int nb = neighbor(r, out);
        room = occ[nb][opposite(out)] < depth_;
      }
      if (!room) continue;
      input_used[chosen] = true;
      if (rt.out_lock[o] < 0) rt.rr[o] = (static_cast<unsigned>(chosen) + 1) % kNumPorts;
      moves.push_back({r, static_cast<unsigned>(chosen), out});
    }
  }

  for (const Move& m : moves) {
    Router& rt = routers_[m.router];
    Flit f = rt.in[m.in].front();
    rt.in[m.in].pop_front();
    ++flit_moves_;
    if (f.head && !f.tail) rt.out_lock[m.out] = static_cast<int>(m.in);
    if (f.tail) rt.out_lock[m.out] = -1;
    if (m.out == kLocal) {
      if (f.tail) {
        FabricPacket pkt = packet(f.packet);
        erase_packet(f.packet);
        pkt.deliver_cycle = cycle_;
        ++delivered_;
        endpoints.accept(m.router, std::move(pkt));
      }
    } else {
      if (f.head) ++packet(f.packet).hops;
      routers_[neighbor(m.router, m.out)].in[opposite(m.out)].push_back(f);
    }
  }

  for (int r = 0; r < n; ++r) {
    auto& inj = injecting_[r];
    if (!inj) {
      const FabricPacket* next = endpoints.peek_outgoing(r);
      if (next == nullptr) continue;
      if (next->dst < 0 || next->dst >= n) fail(ErrorKind::Config, "mesh destination out of range");
      if (next->dst == r) {
        if (!endpoints.can_accept(r)) continue;
        FabricPacket pkt = *next;
        endpoints.pop_outgoing(r);
        pkt.src = r;
        pkt.id = next_id_++;
        pkt.inject_cycle = pkt.deliver_cycle = cycle_;
        pkt.hops = 0;
        ++injected_;
        ++delivered_;
        endpoints.accept(r, std::move(pkt));
        continue;
      }
      if (occ[r][kLocal] >= depth_) continue;
      FabricPacket pkt = *next;
      endpoints.pop_outgoing(r);
      pkt.src = r;
      pkt.id = next_id_++;
      pkt.inject_cycle = cycle_;
      pkt.hops = 0;
      if (pkt.flits == 0) pkt.flits = 1;
      inj = Injecting{pkt.id, 0, pkt.flits, pkt.dst};
      packets_.emplace_back(pkt.id, pkt);
      ++injected_;
    } else if (occ[r][kLocal] >= depth_) {
      continue;
    }
    Flit f{inj->packet, inj->dst, inj->sent == 0, inj->sent + 1 == inj->total};
    routers_[r].in[kLocal].push_back(f);
    if (++inj->sent == inj->total) inj.reset();
  }
}

}  // namespace fg
