"""Deterministic pixel gridworld environments with frame stacking.

Both environments render a small logical grid onto a larger grayscale frame
(each cell becomes a square block of pixels) and return a stack of the last S
frames as the observation, shape (S, H, W) uint8. All stochasticity flows
through the generator passed at construction, so (seed, action sequence)
fully determines a trajectory.
"""

import numpy as np

CATCH_ACTIONS = 3       # left, stay, right
GRID_GOAL_ACTIONS = 4   # up, down, left, right


class _PixelGridEnv:
    """Shared rendering and frame-stack plumbing."""

    def __init__(self, rng, grid_size, render_size, frame_stack):
        if render_size % grid_size != 0:
            raise ValueError("render_size must be a multiple of grid_size")
        self.rng = rng
        self.grid_size = grid_size
        self.render_size = render_size
        self.cell = render_size // grid_size
        self.frame_stack = frame_stack
        self.frames = None
        self.done = True

    @property
    def frame_shape(self):
        return (self.render_size, self.render_size)

    @property
    def obs_shape(self):
        return (self.frame_stack, self.render_size, self.render_size)

    def _blank(self):
        return np.zeros((self.render_size, self.render_size), dtype=np.uint8)

    def _fill_cell(self, frame, row, col, value):
        c = self.cell
        frame[row * c:(row + 1) * c, col * c:(col + 1) * c] = value

    def _observe(self):
        return np.stack(self.frames)

    def _start(self, first_frame):
        self.frames = [first_frame] * self.frame_stack
        self.done = False
        return self._observe()

    def _advance(self, frame):
        self.frames = self.frames[1:] + [frame]
        return self._observe()


class CatchEnv(_PixelGridEnv):
    """Falling-ball catch task.

    The ball starts in a random column of the top row and falls one row per
    step; the paddle sits in the bottom row and moves left/stay/right. The
    episode ends when the ball reaches the bottom row: reward +1 if the paddle
    is in the ball's column, -1 otherwise, 0 on the way down. Every start is
    catchable (the paddle starts centered and has grid_size - 1 moves).
    """

    n_actions = CATCH_ACTIONS

    def __init__(self, rng, grid_size=12, render_size=24, frame_stack=2, episode_cap=0):
        super().__init__(rng, grid_size, render_size, frame_stack)
        self.episode_cap = episode_cap if episode_cap > 0 else grid_size - 1
        self.ball_row = 0
        self.ball_col = 0
        self.paddle_col = 0

    def render(self):
        frame = self._blank()
        self._fill_cell(frame, self.grid_size - 1, self.paddle_col, 255)
        self._fill_cell(frame, self.ball_row, self.ball_col, 255)
        return frame

    def reset(self):
        self.ball_row = 0
        self.ball_col = int(self.rng.integers(self.grid_size))
        self.paddle_col = self.grid_size // 2
        return self._start(self.render())

    def step(self, action):
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"invalid action {action}")
        self.paddle_col = int(np.clip(self.paddle_col + (action - 1), 0, self.grid_size - 1))
        self.ball_row += 1
        reward = 0.0
        if self.ball_row == self.grid_size - 1:
            self.done = True
            reward = 1.0 if self.ball_col == self.paddle_col else -1.0
        return self._advance(self.render()), reward, self.done


class GridGoalEnv(_PixelGridEnv):
    """Reach-the-goal navigation task.

    Agent (intensity 255) and goal (intensity 128) start in distinct random
    cells. Actions move the agent one cell (clamped at walls); reaching the
    goal yields +1 and ends the episode, otherwise reward 0. Episodes are
    capped in length.
    """

    n_actions = GRID_GOAL_ACTIONS
    _MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))

    def __init__(self, rng, grid_size=8, render_size=32, frame_stack=1, episode_cap=64):
        super().__init__(rng, grid_size, render_size, frame_stack)
        self.episode_cap = episode_cap if episode_cap > 0 else 64
        self.agent = (0, 0)
        self.goal = (0, 0)
        self.steps = 0

    def render(self):
        frame = self._blank()
        self._fill_cell(frame, self.goal[0], self.goal[1], 128)
        self._fill_cell(frame, self.agent[0], self.agent[1], 255)
        return frame

    def reset(self):
        n = self.grid_size * self.grid_size
        a = int(self.rng.integers(n))
        g = int(self.rng.integers(n - 1))
        if g >= a:
            g += 1
        self.agent = divmod(a, self.grid_size)
        self.goal = divmod(g, self.grid_size)
        self.steps = 0
        return self._start(self.render())

    def step(self, action):
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"invalid action {action}")
        dr, dc = self._MOVES[action]
        r = int(np.clip(self.agent[0] + dr, 0, self.grid_size - 1))
        c = int(np.clip(self.agent[1] + dc, 0, self.grid_size - 1))
        self.agent = (r, c)
        self.steps += 1
        reward = 0.0
        if self.agent == self.goal:
            reward = 1.0
            self.done = True
        elif self.steps >= self.episode_cap:
            self.done = True
        return self._advance(self.render()), reward, self.done


def make_env(env_id, rng, grid_size=None, render_size=None, frame_stack=None, episode_cap=0):
    """Construct an environment by id, filling unspecified sizes with defaults."""
    if env_id == "catch":
        kwargs = dict(grid_size=12, render_size=24, frame_stack=2)
    elif env_id == "grid_goal":
        kwargs = dict(grid_size=8, render_size=32, frame_stack=1)
    else:
        raise ValueError(f"unknown env_id {env_id!r}")
    if grid_size is not None:
        kwargs["grid_size"] = grid_size
    if render_size is not None:
        kwargs["render_size"] = render_size
    if frame_stack is not None:
        kwargs["frame_stack"] = frame_stack
    cls = CatchEnv if env_id == "catch" else GridGoalEnv
    return cls(rng, episode_cap=episode_cap, **kwargs)


def optimal_catch_action(obs, grid_size):
    """Reference policy for catch, read off the newest frame's pixels.

    Moves the paddle toward the ball's column; catches every episode, which
    makes it the learning-target oracle for evaluation tests.
    """
    frame = obs[-1]
    cell = frame.shape[0] // grid_size
    bottom = frame[-cell:]
    top = frame[:-cell]
    paddle_cols = np.nonzero(bottom.max(axis=0) > 0)[0]
    ball_cols = np.nonzero(top.max(axis=0) > 0)[0]
    if len(paddle_cols) == 0 or len(ball_cols) == 0:
        return 1
    paddle = paddle_cols[0] // cell
    ball = ball_cols[0] // cell
    if ball < paddle:
        return 0
    if ball > paddle:
        return 2
    return 1
