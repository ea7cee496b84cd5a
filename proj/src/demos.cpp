#include "demos.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <queue>

#include "error.hpp"
#include "io.hpp"

namespace backplay {

namespace {

constexpr std::array<Action, 4> kMoveOrder = {Action::kUp, Action::kDown, Action::kLeft,
                                              Action::kRight};

int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

[[noreturn]] void invariant(const std::string& what) {
  fail(ErrorCode::kInvariantViolation, "demo: " + what);
}

}  // namespace

std::vector<Action> astar_plan(const Maze& maze, Cell from) {
  if (!maze.is_open(from)) fail(ErrorCode::kInvalidCell, "A* source is not an open cell");
  const Cell goal = maze.goal();
  const int n = maze.num_cells();

  struct Node {
    int f;
    std::uint64_t order;
    int index;
  };
  auto worse = [](const Node& a, const Node& b) {
    return a.f != b.f ? a.f > b.f : a.order > b.order;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
  std::vector<int> g(static_cast<std::size_t>(n), -1);
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<Action> via(static_cast<std::size_t>(n), Action::kPass);
  std::vector<std::uint8_t> closed(static_cast<std::size_t>(n), 0);
  std::uint64_t counter = 0;

  const int src = maze.index(from);
  g[src] = 0;
  open.push({manhattan(from, goal), counter++, src});
  while (!open.empty()) {
    const Node node = open.top();
    open.pop();
    if (closed[node.index]) continue;
    closed[node.index] = 1;
    const Cell c = maze.cell_at(node.index);
    if (c == goal) break;
    for (Action a : kMoveOrder) {
      const Cell nb = displaced(c, a);
      if (!maze.is_open(nb)) continue;
      const int ni = maze.index(nb);
      const int cand = g[node.index] + 1;
      if (closed[ni] || (g[ni] >= 0 && g[ni] <= cand)) continue;
      g[ni] = cand;
      parent[ni] = node.index;
      via[ni] = a;
      open.push({cand + manhattan(nb, goal), counter++, ni});
    }
  }
  const int gi = maze.index(goal);
  if (g[gi] < 0) fail(ErrorCode::kUnreachable, "goal unreachable from " + hex_id(maze.id()));

  std::vector<Action> plan;
  for (int i = gi; i != src; i = parent[i]) plan.push_back(via[i]);
  std::reverse(plan.begin(), plan.end());
  return plan;
}

Demonstration shortest_path(const Maze& maze) {
  Demonstration d;
  d.maze_id = maze.id();
  d.actions = astar_plan(maze, maze.start());
  d.states.push_back(maze.start());
  for (Action a : d.actions) d.states.push_back(displaced(d.states.back(), a));
  d.optimal_len = maze.shortest_path_length();
  d.gap_n = d.length() - d.optimal_len;
  return d;
}

double default_follow_probability(int optimal_len, int target_gap) {
  if (optimal_len <= 0) return 1.0;
  return std::clamp(1.0 - static_cast<double>(target_gap) / (4.0 * optimal_len), 0.05, 1.0);
}

Demonstration noisy_astar_demo(const Maze& maze, int target_gap, double p, Rng& rng,
                               int max_attempts) {
  if (!(p > 0.0 && p <= 1.0)) fail(ErrorCode::kInvalidArgument, "follow probability must be in (0, 1]");
  if (target_gap < 0) fail(ErrorCode::kInvalidArgument, "target_gap must be >= 0");
  const int optimal = maze.shortest_path_length();
  const int target_len = optimal + target_gap;
  const std::vector<Action> root_plan = astar_plan(maze, maze.start());

  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Demonstration d;
    d.maze_id = maze.id();
    d.optimal_len = optimal;
    d.states.push_back(maze.start());
    std::vector<Action> plan = root_plan;
    std::size_t cursor = 0;
    EnvState state = reset_to(maze, maze.start());
    bool reached = false;
    while (d.length() < target_len) {
      Action a = plan[cursor];
      if (p < 1.0 && uniform01(rng) >= p) a = kAllActions[uniform_index(rng, kNumActions)];
      const StepResult r = step(maze, state, a, target_len + 1);
      d.actions.push_back(a);
      d.states.push_back(r.state.agent);
      state = r.state;
      if (r.reached_goal) {
        reached = true;
        break;
      }
      if (a == plan[cursor]) {
        ++cursor;
      } else {
        plan = astar_plan(maze, state.agent);
        cursor = 0;
      }
    }
    if (reached && d.length() == target_len) {
      d.gap_n = target_gap;
      return d;
    }
  }
  fail(ErrorCode::kExhaustedAttempts,
       "no demonstration with gap " + std::to_string(target_gap) + " after " +
           std::to_string(max_attempts) + " attempts");
}

void validate_demo(const Demonstration& demo, const Maze* maze) {
  if (demo.states.empty()) invariant("no states");
  if (demo.states.size() != demo.actions.size() + 1) invariant("states/actions length mismatch");
  if (demo.gap_n < 0) invariant("negative gap_n");
  if (demo.optimal_len < 0) invariant("negative optimal_len");
  if (demo.gap_n != demo.length() - demo.optimal_len) invariant("gap_n != T - optimal_len");
  for (std::size_t i = 0; i < demo.actions.size(); ++i) {
    const Cell from = demo.states[i];
    const Cell to = demo.states[i + 1];
    if (to != from && to != displaced(from, demo.actions[i]))
      invariant("illegal jump at step " + std::to_string(i));
  }
  if (!maze) return;

  if (demo.maze_id != maze->id()) invariant("maze_id does not match maze");
  if (demo.states.front() != maze->start()) invariant("states[0] is not the maze start");
  if (demo.states.back() != maze->goal()) invariant("states[T] is not the maze goal");
  if (demo.optimal_len != maze->shortest_path_length())
    invariant("optimal_len disagrees with BFS distance");
  EnvState s = reset_to(*maze, demo.states.front());
  const int horizon = demo.length() + 1;
  for (std::size_t i = 0; i < demo.actions.size(); ++i) {
    if (!maze->is_open(s.agent)) invariant("state on a wall at step " + std::to_string(i));
    const StepResult r = step(*maze, s, demo.actions[i], horizon);
    if (r.state.agent != demo.states[i + 1])
      invariant("replay diverges at step " + std::to_string(i));
    if (r.reached_goal && i + 1 != demo.actions.size())
      invariant("goal reached before the final state");
    s = r.state;
  }
}

std::string format_demo(const Demonstration& demo) {
  std::string out = "DEMO v1 " + hex_id(demo.maze_id) + " " + std::to_string(demo.length()) + " " +
                    std::to_string(demo.optimal_len) + " " + std::to_string(demo.gap_n) + "\n";
  for (Cell c : demo.states) out += std::to_string(c.row) + " " + std::to_string(c.col) + "\n";
  for (Action a : demo.actions) out += std::to_string(to_int(a)) + "\n";
  return out;
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}

  std::string_view next() {
    ++line_;
    if (pos_ >= text_.size()) error("unexpected end of file");
    const std::size_t nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) error("missing trailing newline");
    std::string_view out = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }
  bool at_end() const { return pos_ >= text_.size(); }
  int line() const { return line_; }

  [[noreturn]] void error(const std::string& what) const {
    fail(ErrorCode::kParse, "demo line " + std::to_string(line_) + ": " + what);
  }

  std::vector<std::string_view> fields(std::size_t expected) {
    std::string_view l = next();
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
      const std::size_t sp = l.find(' ', pos);
      out.push_back(l.substr(pos, sp == std::string_view::npos ? std::string_view::npos : sp - pos));
      if (sp == std::string_view::npos) break;
      pos = sp + 1;
    }
    if (out.size() != expected)
      error("expected " + std::to_string(expected) + " fields, got " + std::to_string(out.size()));
    return out;
  }

  long long integer(std::string_view tok) const {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size() || v < 0 ||
        std::to_string(v) != tok)
      error("bad integer '" + std::string(tok) + "'");
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 0;
};

}  // namespace

Demonstration parse_demo(std::string_view text, const Maze* maze) {
  LineReader in(text);
  auto header = in.fields(6);
  if (header[0] != "DEMO" || header[1] != "v1") in.error("expected 'DEMO v1' header");
  if (header[2].size() != 16) in.error("maze_id must be 16 hex digits");
  std::uint64_t id = 0;
  for (char ch : header[2]) {
    int v;
    if (ch >= '0' && ch <= '9') v = ch - '0';
    else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
    else in.error("maze_id must be lowercase hex");
    id = (id << 4) | static_cast<std::uint64_t>(v);
  }
  const long long t = in.integer(header[3]);
  if (t > 1'000'000) in.error("implausible length");

  Demonstration d;
  d.maze_id = id;
  d.optimal_len = static_cast<int>(in.integer(header[4]));
  d.gap_n = static_cast<int>(in.integer(header[5]));
  for (long long i = 0; i <= t; ++i) {
    auto f = in.fields(2);
    d.states.push_back({static_cast<int>(in.integer(f[0])), static_cast<int>(in.integer(f[1]))});
  }
  for (long long i = 0; i < t; ++i) {
    auto f = in.fields(1);
    const long long a = in.integer(f[0]);
    if (a >= kNumActions) in.error("action out of range");
    d.actions.push_back(static_cast<Action>(a));
  }
  if (!in.at_end()) {
    in.next();
    in.error("trailing content");
  }
  validate_demo(d, maze);
  return d;
}

Demonstration load_demo_file(const std::string& path, const Maze* maze) {
  return parse_demo(read_file(path), maze);
}

void save_demo_file(const Demonstration& demo, const std::string& path) {
  validate_demo(demo);
  write_file(path, format_demo(demo));
}

}  // namespace backplay
