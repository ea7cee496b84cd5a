#include "gridworld.hpp"

#include <algorithm>
#include <charconv>
#include <deque>
#include <sstream>

#include "error.hpp"
#include "io.hpp"

namespace backplay {

namespace {

std::string cell_str(Cell c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<int> bfs_from(int width, int height, const std::vector<std::uint8_t>& walls,
                          Cell source) {
  std::vector<int> dist(static_cast<std::size_t>(width * height), -1);
  auto idx = [width](Cell c) { return c.row * width + c.col; };
  std::deque<Cell> queue;
  dist[idx(source)] = 0;
  queue.push_back(source);
  while (!queue.empty()) {
    Cell c = queue.front();
    queue.pop_front();
    for (Action a : {Action::kUp, Action::kDown, Action::kLeft, Action::kRight}) {
      Cell n = displaced(c, a);
      if (n.row < 0 || n.row >= height || n.col < 0 || n.col >= width) continue;
      if (walls[idx(n)] || dist[idx(n)] >= 0) continue;
      dist[idx(n)] = dist[idx(c)] + 1;
      queue.push_back(n);
    }
  }
  return dist;
}

}  // namespace

Action action_from_int(int value) {
  if (value < 0 || value >= kNumActions)
    fail(ErrorCode::kInvalidArgument, "action out of range: " + std::to_string(value));
  return static_cast<Action>(value);
}

const char* action_name(Action a) {
  switch (a) {
    case Action::kPass: return "Pass";
    case Action::kUp: return "Up";
    case Action::kDown: return "Down";
    case Action::kLeft: return "Left";
    case Action::kRight: return "Right";
  }
  return "?";
}

Cell displaced(Cell c, Action a) {
  switch (a) {
    case Action::kPass: return c;
    case Action::kUp: return {c.row - 1, c.col};
    case Action::kDown: return {c.row + 1, c.col};
    case Action::kLeft: return {c.row, c.col - 1};
    case Action::kRight: return {c.row, c.col + 1};
  }
  return c;
}

Maze Maze::create(int width, int height, std::vector<Cell> walls, Cell start, Cell goal) {
  if (width <= 0 || height <= 0)
    fail(ErrorCode::kInvariantViolation, "maze dimensions must be positive");
  Maze m;
  m.width_ = width;
  m.height_ = height;
  m.wall_mask_.assign(static_cast<std::size_t>(width * height), 0);
  for (Cell w : walls) {
    if (!m.in_bounds(w)) fail(ErrorCode::kInvariantViolation, "wall out of bounds " + cell_str(w));
    m.wall_mask_[m.index(w)] = 1;
  }
  if (!m.in_bounds(start)) fail(ErrorCode::kInvariantViolation, "start out of bounds");
  if (!m.in_bounds(goal)) fail(ErrorCode::kInvariantViolation, "goal out of bounds");
  if (start == goal) fail(ErrorCode::kInvariantViolation, "start equals goal");
  if (m.wall_mask_[m.index(start)]) fail(ErrorCode::kInvariantViolation, "start is a wall");
  if (m.wall_mask_[m.index(goal)]) fail(ErrorCode::kInvariantViolation, "goal is a wall");

  m.walls_.clear();
  for (int i = 0; i < width * height; ++i)
    if (m.wall_mask_[i]) m.walls_.push_back(m.cell_at(i));
  m.start_ = start;
  m.goal_ = goal;
  m.dist_to_goal_ = bfs_from(width, height, m.wall_mask_, goal);
  if (m.dist_to_goal_[m.index(start)] < 0)
    fail(ErrorCode::kInvariantViolation, "no passage path from start to goal");
  m.id_ = fnv1a(format_maze(m));
  return m;
}

std::vector<Cell> Maze::open_cells() const {
  std::vector<Cell> out;
  for (int i = 0; i < num_cells(); ++i)
    if (!wall_mask_[i]) out.push_back(cell_at(i));
  return out;
}

std::vector<int> bfs_distances(const Maze& maze, Cell source) {
  if (!maze.is_open(source)) fail(ErrorCode::kInvalidCell, "bfs source " + cell_str(source));
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(maze.num_cells()), 0);
  for (Cell w : maze.walls()) mask[maze.index(w)] = 1;
  return bfs_from(maze.width(), maze.height(), mask, source);
}

Maze generate_maze(Rng& rng, const MazeGenConfig& cfg) {
  const int cells = cfg.width * cfg.height;
  if (cfg.width <= 0 || cfg.height <= 0 || cells < 2)
    fail(ErrorCode::kInvalidArgument, "maze must have at least two cells");
  if (cfg.wall_count < 0 || cfg.wall_count >= cells - 2)
    fail(ErrorCode::kInvalidArgument, "wall_count must be in [0, width*height-2)");
  if (cfg.min_path_len < 1) fail(ErrorCode::kInvalidArgument, "min_path_len must be >= 1");

  std::vector<int> others;
  others.reserve(static_cast<std::size_t>(cells));
  for (int attempt = 0; attempt < kMaxMazeRejections; ++attempt) {
    const int start = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cells)));
    int goal = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(cells - 1)));
    if (goal >= start) ++goal;

    others.clear();
    for (int i = 0; i < cells; ++i)
      if (i != start && i != goal) others.push_back(i);
    // Partial Fisher-Yates: the first wall_count entries are a uniform sample
    // without replacement.
    for (int i = 0; i < cfg.wall_count; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) + uniform_index(rng, others.size() - static_cast<std::size_t>(i));
      std::swap(others[static_cast<std::size_t>(i)], others[j]);
    }
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(cells), 0);
    for (int i = 0; i < cfg.wall_count; ++i) mask[static_cast<std::size_t>(others[i])] = 1;

    const Cell s{start / cfg.width, start % cfg.width};
    const Cell g{goal / cfg.width, goal % cfg.width};
    const auto dist = bfs_from(cfg.width, cfg.height, mask, g);
    if (dist[static_cast<std::size_t>(start)] < cfg.min_path_len) continue;

    std::vector<Cell> walls;
    for (int i = 0; i < cells; ++i)
      if (mask[static_cast<std::size_t>(i)]) walls.push_back({i / cfg.width, i % cfg.width});
    return Maze::create(cfg.width, cfg.height, std::move(walls), s, g);
  }
  fail(ErrorCode::kConfigInfeasible,
       "no valid maze after " + std::to_string(kMaxMazeRejections) + " consecutive rejections");
}

StepResult step(const Maze& maze, const EnvState& state, Action action, int max_steps) {
  if (!maze.is_open(state.agent))
    fail(ErrorCode::kInvalidState, "agent on wall or out of bounds at " + cell_str(state.agent));
  if (state.steps_taken < 0 || state.steps_taken >= max_steps)
    fail(ErrorCode::kInvalidState, "step called on a terminal state");

  Cell next = displaced(state.agent, action);
  if (!maze.is_open(next)) next = state.agent;

  StepResult r;
  r.state = {next, state.steps_taken + 1};
  r.reached_goal = next == maze.goal();
  r.reward = kStepPenalty + (r.reached_goal ? kGoalReward : 0.0);
  r.done = r.reached_goal || r.state.steps_taken >= max_steps;
  return r;
}

EnvState reset_to(const Maze& maze, Cell cell) {
  if (!maze.in_bounds(cell)) fail(ErrorCode::kInvalidCell, "reset target out of bounds " + cell_str(cell));
  if (maze.is_wall(cell)) fail(ErrorCode::kInvalidCell, "reset target is a wall " + cell_str(cell));
  return {cell, 0};
}

void observe_into(const Maze& maze, Cell agent, double* out) {
  const int n = maze.num_cells();
  std::fill(out, out + 4 * n, 0.0);
  out[maze.index(agent)] = 1.0;
  out[n + maze.index(maze.goal())] = 1.0;
  for (int i = 0; i < n; ++i) {
    const bool wall = maze.is_wall(maze.cell_at(i));
    out[2 * n + i] = wall ? 0.0 : 1.0;
    out[3 * n + i] = wall ? 1.0 : 0.0;
  }
}

Observation observe(const Maze& maze, const EnvState& state) {
  Observation obs(static_cast<std::size_t>(observation_size(maze.width(), maze.height())));
  observe_into(maze, state.agent, obs.data());
  return obs;
}

ActionPolicy bfs_policy() {
  return [](const Maze& maze, const EnvState& s, Rng&) {
    const int d = maze.distance_to_goal(s.agent);
    if (d <= 0) return Action::kPass;
    for (Action a : {Action::kUp, Action::kDown, Action::kLeft, Action::kRight}) {
      Cell n = displaced(s.agent, a);
      if (maze.is_open(n) && maze.distance_to_goal(n) == d - 1) return a;
    }
    return Action::kPass;
  };
}

ActionPolicy uniform_random_policy() {
  return [](const Maze&, const EnvState&, Rng& rng) {
    return kAllActions[uniform_index(rng, kNumActions)];
  };
}

std::string format_maze(const Maze& maze) {
  std::string out = "MAZE v1 " + std::to_string(maze.width()) + " " +
                    std::to_string(maze.height()) + "\n";
  for (int r = 0; r < maze.height(); ++r) {
    for (int c = 0; c < maze.width(); ++c) {
      const Cell cell{r, c};
      char ch = '.';
      if (cell == maze.start()) ch = 'S';
      else if (cell == maze.goal()) ch = 'G';
      else if (maze.is_wall(cell)) ch = '#';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

namespace {

[[noreturn]] void parse_error(int line, const std::string& what) {
  fail(ErrorCode::kParse, "maze line " + std::to_string(line) + ": " + what);
}

std::vector<std::string_view> split_lines(std::string_view text, int& error_line) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      error_line = static_cast<int>(lines.size()) + 1;
      return {};
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

int parse_positive(std::string_view tok, int line, const char* what) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || value <= 0 ||
      std::to_string(value) != tok)
    parse_error(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
  return value;
}

}  // namespace

Maze parse_maze(std::string_view text) {
  int missing_newline_line = 0;
  auto lines = split_lines(text, missing_newline_line);
  if (missing_newline_line) parse_error(missing_newline_line, "missing trailing newline");
  if (lines.empty()) parse_error(1, "empty input");

  std::string_view header = lines[0];
  constexpr std::string_view kMagic = "MAZE v1 ";
  if (header.substr(0, kMagic.size()) != kMagic) parse_error(1, "expected 'MAZE v1 <width> <height>'");
  header.remove_prefix(kMagic.size());
  const std::size_t sp = header.find(' ');
  if (sp == std::string_view::npos) parse_error(1, "expected '<width> <height>'");
  const int width = parse_positive(header.substr(0, sp), 1, "width");
  const int height = parse_positive(header.substr(sp + 1), 1, "height");

  if (static_cast<int>(lines.size()) - 1 < height)
    parse_error(static_cast<int>(lines.size()) + 1, "truncated: expected " + std::to_string(height) + " rows");
  if (static_cast<int>(lines.size()) - 1 > height)
    parse_error(height + 2, "trailing content after last row");

  std::vector<Cell> walls;
  std::optional<Cell> start, goal;
  for (int r = 0; r < height; ++r) {
    const std::string_view row = lines[static_cast<std::size_t>(r) + 1];
    const int line = r + 2;
    if (static_cast<int>(row.size()) != width)
      parse_error(line, "row has " + std::to_string(row.size()) + " cells, expected " + std::to_string(width));
    for (int c = 0; c < width; ++c) {
      switch (row[static_cast<std::size_t>(c)]) {
        case '#': walls.push_back({r, c}); break;
        case '.': break;
        case 'S':
          if (start) parse_error(line, "second start cell");
          start = Cell{r, c};
          break;
        case 'G':
          if (goal) parse_error(line, "second goal cell");
          goal = Cell{r, c};
          break;
        default: parse_error(line, std::string("unexpected character '") + row[static_cast<std::size_t>(c)] + "'");
      }
    }
  }
  if (!start) parse_error(1, "no start cell");
  if (!goal) parse_error(1, "no goal cell");
  return Maze::create(width, height, std::move(walls), *start, *goal);
}

Maze load_maze_file(const std::string& path) { return parse_maze(read_file(path)); }

void save_maze_file(const Maze& maze, const std::string& path) {
  write_file(path, format_maze(maze));
}

std::string hex_id(std::uint64_t id) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[id & 0xf];
    id >>= 4;
  }
  return out;
}

}  // namespace backplay
