#pragma once

// Live sessions: edit queue, stepping clock, binary frames and the JSON control protocol.
// Transport-agnostic; the websocket server in server.hpp drives it.

#include "lenia/io.hpp"
#include "lenia/simulator.hpp"

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace lenia {

// Binary frames: 16-byte little-endian header followed by row-major [C,H,W] samples.
//   0  u32 magic "LNFR"
//   4  u32 step index (low 32 bits)
//   8  u16 channel count C
//  10  u16 flags (bit 0: samples are u8 = round(255 * clamp(v, 0, 1)), else f32le)
//  12  u16 height H
//  14  u16 width W

inline constexpr std::uint32_t kFrameMagic = 0x52464E4C;  // "LNFR" in memory order
inline constexpr std::size_t kFrameHeaderSize = 16;
inline constexpr std::uint16_t kFrameFlagU8 = 1;

enum class FrameFormat { F32, U8 };

struct FrameHeader {
  std::uint32_t magic = kFrameMagic;
  std::uint32_t step = 0;
  std::uint16_t channels = 0;
  std::uint16_t flags = 0;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
};

std::string encode_frame(const GridState<float>& state, FrameFormat format = FrameFormat::F32);

struct DecodedFrame {
  FrameHeader header;
  std::vector<float> samples;  ///< u8 samples are mapped back to v / 255
};
/// Throws InvalidArgument on a bad magic or a size that does not match the header.
DecodedFrame decode_frame(const std::string& bytes);

// Edits.

enum class EditKind {
  DrawObstacle,
  EraseObstacle,
  EraseMass,
  SpawnInit,
  PlaceAttractor,
  MoveAttractor,
  RemoveAttractor,
  Pause,
  Resume,
  SetSpeed,
  LoadParams,
};

const char* to_string(EditKind kind);
EditKind edit_kind_from_string(const std::string& name);

struct Rect {
  int row = 0;
  int col = 0;
  int rows = 0;
  int cols = 0;
};

struct EditCommand {
  EditKind kind = EditKind::Pause;
  Disk disk;                          ///< obstacle and attractor edits
  Rect rect;                          ///< erase_mass
  int row = 0, col = 0;               ///< spawn_init offset
  double steps_per_second = 20.0;     ///< set_speed
  std::optional<ParamsFile> params;   ///< load_params
};

/// Parses an edit payload {kind, ...geometry}. `params_dir` resolves "params_file" names.
EditCommand parse_edit(const Json& payload, const fs::path& params_dir = {});

// Sessions.

class Session {
 public:
  Session(std::string id, ParamsFile params, GridShape shape, double steps_per_second = 20.0);

  const std::string& id() const { return id_; }

  /// Queues an edit; it is applied between steps, in arrival order.
  void enqueue(EditCommand edit);

  /// Clock tick: steps once unless paused, then applies queued edits. Returns true when a
  /// new frame exists (i.e. the session stepped).
  bool tick();

  /// Applies queued edits without stepping. Returns warnings (clipped geometry).
  std::vector<std::string> drain();

  bool paused() const;
  double steps_per_second() const;
  std::int64_t step() const;
  GridState<float> snapshot() const;
  RuleSet rules() const;
  std::vector<std::string> take_warnings();

 private:
  void apply(const EditCommand& e);
  void rebuild();

  std::string id_;
  ParamsFile params_;
  GridShape shape_;
  double steps_per_second_;
  bool paused_ = false;
  std::optional<Disk> attractor_;
  std::unique_ptr<Simulator<float>> sim_;
  GridState<float> state_;
  Rng rng_;
  std::deque<EditCommand> queue_;
  std::vector<std::string> warnings_;
  mutable std::mutex mutex_;
};

/// Receives encoded frames for one client.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void send_frame(std::shared_ptr<const std::string> frame) = 0;
};

/// Session registry plus the control-message dispatcher.
class SessionHub {
 public:
  explicit SessionHub(fs::path params_dir = {}) : params_dir_(std::move(params_dir)) {}

  /// Handles {type, session, payload}; always returns a reply, {type:"error"} on failure.
  Json dispatch(const Json& message, const std::shared_ptr<FrameSink>& client);
  Json dispatch_text(const std::string& text, const std::shared_ptr<FrameSink>& client);

  /// Ticks one session and fans the frame out to its live subscribers.
  bool advance(const std::string& session_id);

  std::shared_ptr<Session> find(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  /// Drops every subscription held by `client`.
  void disconnect(const FrameSink* client);

 private:
  struct Subscription {
    std::weak_ptr<FrameSink> sink;
    FrameFormat format;
  };
  struct Entry {
    std::shared_ptr<Session> session;
    std::vector<Subscription> subscribers;
  };

  fs::path params_dir_;
  std::map<std::string, Entry> sessions_;
  std::uint64_t next_id_ = 1;
  mutable std::mutex mutex_;
};

}  // namespace lenia
