#pragma once

#include <array>
#include <cstdlib>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "fireguard/common.hpp"

namespace fg {

/// Inter-engine message riding the mesh. A 64-bit message is one flit; a
/// full 256-bit packet would be two.
struct FabricPacket {
  uint64_t id = 0;
  int src = 0;
  int dst = 0;
  uint8_t tag = 0;
  unsigned kernel = 0;
  uint64_t value = 0;
  unsigned flits = 1;
  unsigned hops = 0;
  uint64_t inject_cycle = 0;
  uint64_t deliver_cycle = 0;
};

struct Coord {
  int x = 0;
  int y = 0;
  bool operator==(const Coord&) const = default;
};

inline unsigned manhattan(Coord a, Coord b) {
  return static_cast<unsigned>(std::abs(a.x - b.x) + std::abs(a.y - b.y));
}

/// The mesh pulls from per-node source queues and pushes into per-node
/// sinks through this interface.
class MeshEndpoints {
 public:
  virtual ~MeshEndpoints() = default;
  virtual const FabricPacket* peek_outgoing(int node) = 0;
  virtual void pop_outgoing(int node) = 0;
  virtual bool can_accept(int node) const = 0;
  virtual void accept(int node, FabricPacket&& pkt) = 0;
};

enum Port : unsigned { kNorth = 0, kSouth, kEast, kWest, kLocal, kNumPorts };

/// Wormhole mesh with XY routing and credit-style back-pressure: a flit only
/// moves when the downstream buffer had a free slot at the start of the cycle.
class Mesh {
 public:
  Mesh(int width, int height, size_t port_depth = 4);

  void step(MeshEndpoints& endpoints);

  int width() const { return width_; }
  int height() const { return height_; }
  int nodes() const { return width_ * height_; }
  Coord coord(int node) const { return {node % width_, node / width_}; }
  int node_at(Coord c) const { return c.y * width_ + c.x; }
  uint64_t cycle() const { return cycle_; }

  size_t flits_in_flight() const;
  size_t packets_in_flight() const { return packets_.size(); }
  uint64_t injected() const { return injected_; }
  uint64_t delivered() const { return delivered_; }
  uint64_t flit_moves() const { return flit_moves_; }
  /// Route output chosen at `node` for a packet headed to `dst`.
  Port route(int node, int dst) const;

 private:
  struct Flit {
    uint64_t packet = 0;
    int dst = 0;
    bool head = false;
    bool tail = false;
  };
  struct Router {
    std::array<std::deque<Flit>, kNumPorts> in;
    std::array<int, kNumPorts> out_lock{-1, -1, -1, -1, -1};
    std::array<unsigned, kNumPorts> rr{};
  };
  struct Injecting {
    uint64_t packet = 0;
    unsigned sent = 0;
    unsigned total = 0;
    int dst = 0;
  };

  int neighbor(int node, Port p) const;

  int width_;
  int height_;
  size_t depth_;
  uint64_t cycle_ = 0;
  uint64_t next_id_ = 1;
  uint64_t injected_ = 0;
  uint64_t delivered_ = 0;
  uint64_t flit_moves_ = 0;
  std::vector<Router> routers_;
  std::vector<std::optional<Injecting>> injecting_;
  std::vector<std::pair<uint64_t, FabricPacket>> packets_;  // sorted by id

  FabricPacket& packet(uint64_t id);
  void erase_packet(uint64_t id);
};

/// Picks mesh dimensions for n engines: the narrowest near-square grid.
std::pair<int, int> default_mesh_dims(unsigned engines);

}  // namespace fg
