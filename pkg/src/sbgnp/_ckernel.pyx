# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Tileworld episode kernel; mirrors ``_pykernel.run_kernel``."""

cimport cython
from libc.stdlib cimport abs as iabs

cdef enum:
    FLOOR = 0
    OBSTACLE = 1
    TILE = 2
    HOLE = 3

cdef enum:
    WEF = 0
    WER = 1
    WEL = 2
    WEB = 3
    NTD = 4
    SNTD = 5
    NHD = 6
    MF = 7
    TR = 8
    TL = 9
    ST = 10

cdef int DX[4]
cdef int DY[4]
DX[:] = [0, 1, 0, -1]
DY[:] = [-1, 0, 1, 0]


cdef inline int _direction(int h, int dx, int dy) noexcept nogil:
    cdef int axial = dx * DX[h] + dy * DY[h]
    cdef int r = (h + 1) & 3
    cdef int lateral = dx * DX[r] + dy * DY[r]
    if iabs(axial) >= iabs(lateral):
        return 0 if axial > 0 else 1
    return 2 if lateral > 0 else 3


cdef inline bint _less(int d, int y, int x, int bd, int by, int bx) noexcept nogil:
    if d != bd:
        return d < bd
    if y != by:
        return y < by
    return x < bx


cdef int _nearest(const int[:] xs, const int[:] ys, const unsigned char[:] alive,
                  bint use_alive, int x, int y, bint second, int* ox, int* oy) noexcept nogil:
    """Write the (second-)nearest live position to ox/oy; return 0 if none."""
    cdef int i, d, n = xs.shape[0]
    cdef int bd = -1, by = 0, bx = 0, sd = -1, sy = 0, sx = 0
    for i in range(n):
        if use_alive:
            if not alive[i]:
                continue
        elif xs[i] < 0:
            continue
        d = iabs(xs[i] - x) + iabs(ys[i] - y)
        if bd < 0 or _less(d, ys[i], xs[i], bd, by, bx):
            sd, sy, sx = bd, by, bx
            bd, by, bx = d, ys[i], xs[i]
        elif sd < 0 or _less(d, ys[i], xs[i], sd, sy, sx):
            sd, sy, sx = d, ys[i], xs[i]
    if bd < 0:
        return 0
    if second and sd >= 0:
        ox[0] = sx
        oy[0] = sy
    else:
        ox[0] = bx
        oy[0] = by
    return 1


@cython.boundscheck(False)
@cython.wraparound(False)
def run_kernel(const signed char[:, :] types, const signed char[:, :] codes,
               const int[:, :, :] targets, const int[:] member_of_agent,
               signed char[:, :] cells, short[:, :] ident, signed char[:, :] agent_at,
               int[:] ax, int[:] ay, int[:] ah,
               int[:] tile_x, int[:] tile_y,
               const int[:] hole_x, const int[:] hole_y, unsigned char[:] hole_alive,
               int initial_steps, int idle_code, unsigned char[:, :, :] transit):
    """Run one episode in place; returns ``(dropped, steps_taken)``."""
    cdef int height = cells.shape[0], width = cells.shape[1]
    cdef int n_nodes = types.shape[1]
    cdef int n_agents = member_of_agent.shape[0]
    cdef int n_tiles = tile_x.shape[0]
    cdef int dropped = 0, step = 0, a, m, node, visits, action, b, code
    cdef int x, y, h, d, nx, ny, bx, by, c, beyond, t, tx = 0, ty = 0, found
    cdef int cursor[128]
    if n_agents > 128:
        raise ValueError("at most 128 agents are supported")
    for a in range(n_agents):
        cursor[a] = 0

    with nogil:
        for step in range(1, initial_steps + 1):
            for a in range(n_agents):
                m = member_of_agent[a]
                node = cursor[a]
                if types[m, node] == 0:
                    transit[m, node, 0] = 1
                    node = targets[m, node, 0]
                visits = 0
                action = -1
                while types[m, node] == 1:
                    if visits == n_nodes:
                        action = idle_code
                        break
                    code = codes[m, node]
                    x = ax[a]
                    y = ay[a]
                    h = ah[a]
                    if code <= WEB:
                        if code == WEF:
                            d = h
                        elif code == WER:
                            d = (h + 1) & 3
                        elif code == WEL:
                            d = (h + 3) & 3
                        else:
                            d = (h + 2) & 3
                        nx = x + DX[d]
                        ny = y + DY[d]
                        if nx < 0 or ny < 0 or nx >= width or ny >= height:
                            b = 3
                        elif agent_at[ny, nx] >= 0:
                            b = 0
                        else:
                            c = cells[ny, nx]
                            if c == TILE:
                                b = 1
                            elif c == HOLE:
                                b = 2
                            elif c == OBSTACLE:
                                b = 3
                            else:
                                b = 4
                    else:
                        if code == NHD:
                            found = _nearest(hole_x, hole_y, hole_alive, True, x, y, False, &tx, &ty)
                        else:
                            found = _nearest(tile_x, tile_y, hole_alive, False, x, y,
                                             code == SNTD, &tx, &ty)
                        b = _direction(h, tx - x, ty - y) if found else 0
                    transit[m, node, b] = 1
                    node = targets[m, node, b]
                    visits += 1
                if action < 0:
                    transit[m, node, 0] = 1
                    action = codes[m, node]
                    cursor[a] = targets[m, node, 0]
                else:
                    cursor[a] = node

                if action == TR:
                    ah[a] = (ah[a] + 1) & 3
                elif action == TL:
                    ah[a] = (ah[a] + 3) & 3
                elif action == MF:
                    x = ax[a]
                    y = ay[a]
                    h = ah[a]
                    nx = x + DX[h]
                    ny = y + DY[h]
                    if nx < 0 or ny < 0 or nx >= width or ny >= height or agent_at[ny, nx] >= 0:
                        continue
                    c = cells[ny, nx]
                    if c == TILE:
                        bx = nx + DX[h]
                        by = ny + DY[h]
                        if bx < 0 or by < 0 or bx >= width or by >= height or agent_at[by, bx] >= 0:
                            continue
                        beyond = cells[by, bx]
                        t = ident[ny, nx]
                        if beyond == FLOOR:
                            cells[by, bx] = TILE
                            ident[by, bx] = t
                            tile_x[t] = bx
                            tile_y[t] = by
                        elif beyond == HOLE:
                            hole_alive[ident[by, bx]] = 0
                            cells[by, bx] = FLOOR
                            ident[by, bx] = -1
                            tile_x[t] = -1
                            tile_y[t] = -1
                            dropped += 1
                        else:
                            continue
                        cells[ny, nx] = FLOOR
                        ident[ny, nx] = -1
                    elif c != FLOOR:
                        continue
                    agent_at[y, x] = -1
                    agent_at[ny, nx] = a
                    ax[a] = nx
                    ay[a] = ny
                    if dropped == n_tiles:
                        break
            if dropped == n_tiles:
                break
    return dropped, step
