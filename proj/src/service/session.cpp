#include "lenia/service.hpp"

#include "lenia/error.hpp"
#include "lenia/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

namespace lenia {

// Frames.

namespace {

template <typename T>
void put(std::string& out, std::size_t offset, T value) {
  std::memcpy(out.data() + offset, &value, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::string encode_frame(const GridState<float>& state, FrameFormat format) {
  const GridShape s = state.shape();
  if (s.rows > 0xFFFF || s.cols > 0xFFFF || state.n_channels() > 0xFFFF) {
    throw Error(ErrorCode::InvalidArgument, "frame dimensions exceed 16 bits");
  }
  const std::size_t n = std::size_t(state.n_channels()) * s.rows * s.cols;
  const std::size_t sample = format == FrameFormat::U8 ? 1 : sizeof(float);
  std::string out(kFrameHeaderSize + n * sample, '\0');
  put<std::uint32_t>(out, 0, kFrameMagic);
  put<std::uint32_t>(out, 4, static_cast<std::uint32_t>(state.step));
  put<std::uint16_t>(out, 8, static_cast<std::uint16_t>(state.n_channels()));
  put<std::uint16_t>(out, 10, format == FrameFormat::U8 ? kFrameFlagU8 : 0);
  put<std::uint16_t>(out, 12, static_cast<std::uint16_t>(s.rows));
  put<std::uint16_t>(out, 14, static_cast<std::uint16_t>(s.cols));
  std::size_t offset = kFrameHeaderSize;
  for (const GridF& ch : state.channels) {
    if (format == FrameFormat::F32) {
      std::memcpy(out.data() + offset, ch.data(), ch.size() * sizeof(float));
      offset += ch.size() * sizeof(float);
    } else {
      for (Eigen::Index i = 0; i < ch.size(); ++i) {
        const float v = std::clamp(ch.data()[i], 0.0f, 1.0f);
        out[offset++] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }
  return out;
}

DecodedFrame decode_frame(const std::string& bytes) {
  if (bytes.size() < kFrameHeaderSize) {
    throw Error(ErrorCode::InvalidArgument, "frame shorter than its header");
  }
  DecodedFrame f;
  f.header.magic = get<std::uint32_t>(bytes, 0);
  f.header.step = get<std::uint32_t>(bytes, 4);
  f.header.channels = get<std::uint16_t>(bytes, 8);
  f.header.flags = get<std::uint16_t>(bytes, 10);
  f.header.height = get<std::uint16_t>(bytes, 12);
  f.header.width = get<std::uint16_t>(bytes, 14);
  if (f.header.magic != kFrameMagic) {
    throw Error(ErrorCode::InvalidArgument, "bad frame magic");
  }
  const std::size_t n = std::size_t(f.header.channels) * f.header.height * f.header.width;
  const bool u8 = f.header.flags & kFrameFlagU8;
  if (bytes.size() != kFrameHeaderSize + n * (u8 ? 1 : sizeof(float))) {
    throw Error(ErrorCode::InvalidArgument, "frame size does not match its header");
  }
  f.samples.resize(n);
  if (u8) {
    for (std::size_t i = 0; i < n; ++i) {
      f.samples[i] = static_cast<std::uint8_t>(bytes[kFrameHeaderSize + i]) / 255.0f;
    }
  } else {
    std::memcpy(f.samples.data(), bytes.data() + kFrameHeaderSize, n * sizeof(float));
  }
  return f;
}

// Edits.

namespace {

constexpr std::pair<EditKind, const char*> kEditNames[] = {
    {EditKind::DrawObstacle, "draw_obstacle"},     {EditKind::EraseObstacle, "erase_obstacle"},
    {EditKind::EraseMass, "erase_mass"},           {EditKind::SpawnInit, "spawn_init"},
    {EditKind::PlaceAttractor, "place_attractor"}, {EditKind::MoveAttractor, "move_attractor"},
    {EditKind::RemoveAttractor, "remove_attractor"}, {EditKind::Pause, "pause"},
    {EditKind::Resume, "resume"},                  {EditKind::SetSpeed, "set_speed"},
    {EditKind::LoadParams, "load_params"},
};

ParamsFile params_payload(const Json& payload, const fs::path& params_dir) {
  if (auto it = payload.find("params"); it != payload.end()) {
    return params_from_json(*it, params_dir);
  }
  if (auto it = payload.find("params_file"); it != payload.end()) {
    const fs::path name = it->get<std::string>();
    if (name.is_absolute() || name.lexically_normal().string().starts_with("..")) {
      throw Error(ErrorCode::InvalidArgument, "params_file must be relative to the params directory");
    }
    return read_params(params_dir / name);
  }
  throw Error(ErrorCode::InvalidArgument, "payload needs \"params\" or \"params_file\"");
}

Disk disk_payload(const Json& p, double default_radius) {
  return {p.at("x").get<double>(), p.at("y").get<double>(), p.value("radius", default_radius)};
}

}  // namespace

const char* to_string(EditKind kind) {
  for (const auto& [k, name] : kEditNames) {
    if (k == kind) {
      return name;
    }
  }
  return "?";
}

EditKind edit_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kEditNames) {
    if (name == n) {
      return k;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown edit kind \"" + name + "\"");
}

EditCommand parse_edit(const Json& payload, const fs::path& params_dir) {
  EditCommand e;
  try {
    e.kind = edit_kind_from_string(payload.at("kind").get<std::string>());
    switch (e.kind) {
      case EditKind::DrawObstacle:
      case EditKind::EraseObstacle:
      case EditKind::PlaceAttractor:
        e.disk = disk_payload(payload, 10.0);
        if (!(e.disk.radius > 0.0)) {
          throw Error(ErrorCode::InvalidArgument, "disk radius must be positive");
        }
        break;
      case EditKind::MoveAttractor:
        e.disk = disk_payload(payload, 0.0);  // radius 0 keeps the current one
        break;
      case EditKind::EraseMass:
        e.rect = {payload.at("row").get<int>(), payload.at("col").get<int>(), payload.at("rows").get<int>(),
                  payload.at("cols").get<int>()};
        if (e.rect.rows < 0 || e.rect.cols < 0) {
          throw Error(ErrorCode::InvalidArgument, "rectangle size must be non-negative");
        }
        break;
      case EditKind::SpawnInit:
        e.row = payload.at("row").get<int>();
        e.col = payload.at("col").get<int>();
        break;
      case EditKind::SetSpeed:
        e.steps_per_second = payload.at("steps_per_second").get<double>();
        if (!(e.steps_per_second > 0.0) || e.steps_per_second > 1000.0) {
          throw Error(ErrorCode::InvalidArgument, "steps_per_second must be in (0, 1000]");
        }
        break;
      case EditKind::LoadParams:
        e.params = params_payload(payload, params_dir);
        validate_rules(e.params->rules);
        break;
      default:
        break;
    }
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed edit payload: ") + ex.what());
  }
  return e;
}

namespace {

bool disk_inside(const Disk& d, GridShape s) {
  return d.x - d.radius >= 0 && d.y - d.radius >= 0 && d.x + d.radius <= s.rows && d.y + d.radius <= s.cols;
}

/// Intersection of [row, row + rows) x [col, col + cols) with the grid.
Rect clip(const Rect& r, GridShape s) {
  const int r0 = std::clamp(r.row, 0, s.rows), r1 = std::clamp(r.row + r.rows, 0, s.rows);
  const int c0 = std::clamp(r.col, 0, s.cols), c1 = std::clamp(r.col + r.cols, 0, s.cols);
  return {r0, c0, std::max(0, r1 - r0), std::max(0, c1 - c0)};
}

bool same_rect(const Rect& a, const Rect& b) {
  return a.row == b.row && a.col == b.col && a.rows == b.rows && a.cols == b.cols;
}

}  // namespace

// Session.

Session::Session(std::string id, ParamsFile params, GridShape shape, double steps_per_second)
    : id_(std::move(id)), params_(std::move(params)), shape_(shape), steps_per_second_(steps_per_second),
      state_(3, shape), rng_(derive_seed(0, "session")) {
  rebuild();
  stamp(state_.learnable(), params_.init);
}

void Session::rebuild() {
  validate_rules(params_.rules);
  sim_ = std::make_unique<Simulator<float>>(params_.rules, shape_);
}

void Session::enqueue(EditCommand edit) {
  std::lock_guard lock(mutex_);
  queue_.push_back(std::move(edit));
}

void Session::apply(const EditCommand& e) {
  auto clipped_disk = [&](const Disk& d) {
    if (!disk_inside(d, shape_)) {
      warnings_.push_back(std::string(to_string(e.kind)) + ": disk clipped to the grid");
    }
    return rasterize_disks({d}, shape_, false).cast<float>().eval();
  };
  switch (e.kind) {
    case EditKind::DrawObstacle:
      state_.channels[kObstacleChannel] = state_.channels[kObstacleChannel].max(clipped_disk(e.disk));
      break;
    case EditKind::EraseObstacle:
      state_.channels[kObstacleChannel] *= 1.0f - clipped_disk(e.disk);
      break;
    case EditKind::EraseMass: {
      const Rect r = clip(e.rect, shape_);
      if (!same_rect(r, e.rect)) {
        warnings_.push_back("erase_mass: rectangle clipped to the grid");
      }
      state_.learnable().block(r.row, r.col, r.rows, r.cols).setZero();
      break;
    }
    case EditKind::SpawnInit: {
      const InitPattern& init = params_.init;
      const Rect r = clip({e.row, e.col, init.rows(), init.cols()}, shape_);
      if (!same_rect(r, {e.row, e.col, init.rows(), init.cols()})) {
        warnings_.push_back("spawn_init: pattern clipped to the grid");
      }
      state_.learnable().block(r.row, r.col, r.rows, r.cols) =
          init.values.block(r.row - e.row, r.col - e.col, r.rows, r.cols).cwiseMax(0.0).cwiseMin(1.0).cast<float>();
      break;
    }
    case EditKind::PlaceAttractor:
      attractor_ = e.disk;
      state_.channels[kAttractorChannel] = clipped_disk(e.disk);
      break;
    case EditKind::MoveAttractor:
      if (!attractor_) {
        warnings_.push_back("move_attractor: no attractor placed");
        break;
      }
      attractor_->x = e.disk.x;
      attractor_->y = e.disk.y;
      if (e.disk.radius > 0.0) {
        attractor_->radius = e.disk.radius;
      }
      state_.channels[kAttractorChannel] = clipped_disk(*attractor_);
      break;
    case EditKind::RemoveAttractor:
      attractor_.reset();
      state_.channels[kAttractorChannel].setZero();
      break;
    case EditKind::Pause:
      paused_ = true;
      break;
    case EditKind::Resume:
      paused_ = false;
      break;
    case EditKind::SetSpeed:
      steps_per_second_ = e.steps_per_second;
      break;
    case EditKind::LoadParams:
      params_ = *e.params;
      rebuild();
      break;
  }
}

std::vector<std::string> Session::drain() {
  std::lock_guard lock(mutex_);
  while (!queue_.empty()) {
    apply(queue_.front());
    queue_.pop_front();
  }
  return std::exchange(warnings_, {});
}

bool Session::tick() {
  std::lock_guard lock(mutex_);
  bool stepped = false;
  if (!paused_) {
    try {
      sim_->step(state_, {}, rng_);
      stepped = true;
    } catch (const Error& e) {
      paused_ = true;
      warnings_.push_back(std::string("paused after ") + to_string(e.code()) + ": " + e.what());
    }
  }
  while (!queue_.empty()) {
    apply(queue_.front());
    queue_.pop_front();
  }
  return stepped;
}

bool Session::paused() const {
  std::lock_guard lock(mutex_);
  return paused_;
}

double Session::steps_per_second() const {
  std::lock_guard lock(mutex_);
  return steps_per_second_;
}

std::int64_t Session::step() const {
  std::lock_guard lock(mutex_);
  return state_.step;
}

GridState<float> Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return state_;
}

RuleSet Session::rules() const {
  std::lock_guard lock(mutex_);
  return params_.rules;
}

std::vector<std::string> Session::take_warnings() {
  std::lock_guard lock(mutex_);
  return std::exchange(warnings_, {});
}

// Hub.

namespace {

Json error_reply(const std::string& message, const char* code, const Json& session) {
  return Json{{"type", "error"}, {"code", code}, {"message", message}, {"session", session}};
}

}  // namespace

Json SessionHub::dispatch_text(const std::string& text, const std::shared_ptr<FrameSink>& client) {
  Json message;
  try {
    message = Json::parse(text);
  } catch (const Json::exception& e) {
    return error_reply(std::string("malformed JSON: ") + e.what(), to_string(ErrorCode::InvalidArgument), nullptr);
  }
  return dispatch(message, client);
}

Json SessionHub::dispatch(const Json& message, const std::shared_ptr<FrameSink>& client) {
  const Json session_field = message.is_object() ? message.value("session", Json(nullptr)) : Json(nullptr);
  try {
    if (!message.is_object() || !message.contains("type") || !message["type"].is_string()) {
      throw Error(ErrorCode::InvalidArgument, "message needs a string \"type\"");
    }
    const std::string type = message["type"];
    const Json payload = message.value("payload", Json::object());
    if (type == "create") {
      ParamsFile params = params_payload(payload, params_dir_);
      GridShape shape;
      if (auto it = payload.find("shape"); it != payload.end()) {
        shape = {it->at(0).get<int>(), it->at(1).get<int>()};
      }
      if (shape.rows < 8 || shape.cols < 8 || shape.rows > 4096 || shape.cols > 4096) {
        throw Error(ErrorCode::InvalidArgument, "session shape must be within [8, 4096]");
      }
      const double sps = payload.value("steps_per_second", 20.0);
      std::lock_guard lock(mutex_);
      const std::string id = "s" + std::to_string(next_id_++);
      auto session = std::make_shared<Session>(id, std::move(params), shape, sps);
      sessions_[id] = Entry{session, {}};
      return Json{{"type", "created"}, {"session", id}, {"step", 0}, {"shape", {shape.rows, shape.cols}},
                  {"channels", 3}};
    }
    const std::string id = session_field.is_string() ? session_field.get<std::string>() : "";
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      throw Error(ErrorCode::InvalidArgument, "unknown session \"" + id + "\"");
    }
    Entry& entry = it->second;
    if (type == "edit") {
      const EditCommand edit = parse_edit(payload, params_dir_);
      entry.session->enqueue(edit);
      return Json{{"type", "ack"}, {"session", id}, {"kind", to_string(edit.kind)}};
    }
    if (type == "subscribe") {
      const std::string fmt = payload.value("format", "f32");
      if (fmt != "f32" && fmt != "u8") {
        throw Error(ErrorCode::InvalidArgument, "format must be \"f32\" or \"u8\"");
      }
      if (!client) {
        throw Error(ErrorCode::InvalidArgument, "subscribe needs a connected client");
      }
      entry.subscribers.push_back({client, fmt == "u8" ? FrameFormat::U8 : FrameFormat::F32});
      return Json{{"type", "subscribed"}, {"session", id}, {"step", entry.session->step()}, {"format", fmt}};
    }
    if (type == "destroy") {
      sessions_.erase(it);
      return Json{{"type", "destroyed"}, {"session", id}};
    }
    throw Error(ErrorCode::InvalidArgument, "unknown message type \"" + type + "\"");
  } catch (const Error& e) {
    return error_reply(e.what(), to_string(e.code()), session_field);
  } catch (const Json::exception& e) {
    return error_reply(std::string("malformed payload: ") + e.what(), to_string(ErrorCode::InvalidArgument), session_field);
  }
}

bool SessionHub::advance(const std::string& session_id) {
  std::shared_ptr<Session> session;
  std::vector<Subscription> subscribers;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
      return false;
    }
    auto& subs = it->second.subscribers;
    std::erase_if(subs, [](const Subscription& s) { return s.sink.expired(); });
    session = it->second.session;
    subscribers = subs;
  }
  if (!session->tick()) {
    return false;
  }
  const GridState<float> state = session->snapshot();
  std::shared_ptr<const std::string> frames[2];
  for (const Subscription& s : subscribers) {
    auto sink = s.sink.lock();
    if (!sink) {
      continue;
    }
    auto& frame = frames[s.format == FrameFormat::U8];
    if (!frame) {
      frame = std::make_shared<const std::string>(encode_frame(state, s.format));
    }
    sink->send_frame(frame);
  }
  return true;
}

std::shared_ptr<Session> SessionHub::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second.session;
}

std::vector<std::string> SessionHub::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, entry] : sessions_) {
    ids.push_back(id);
  }
  return ids;
}

void SessionHub::disconnect(const FrameSink* client) {
  std::lock_guard lock(mutex_);
  for (auto& [id, entry] : sessions_) {
    std::erase_if(entry.subscribers, [&](const Subscription& s) {
      auto sink = s.sink.lock();
      return !sink || sink.get() == client;
    });
  }
}

}  // namespace lenia
