"""Pure-Python Tileworld episode kernel.

Same signature and semantics as the compiled ``_ckernel`` module; used when the
extension is not built or when ``SBGNP_PURE=1`` is set.
"""

# cell codes
FLOOR, OBSTACLE, TILE, HOLE = 0, 1, 2, 3
# function codes
WEF, WER, WEL, WEB, NTD, SNTD, NHD, MF, TR, TL, ST = range(11)
START, JUDGMENT = 0, 1

DX = (0, 1, 0, -1)
DY = (-1, 0, 1, 0)


def _direction(h, dx, dy):
    axial = dx * DX[h] + dy * DY[h]
    r = (h + 1) & 3
    lateral = dx * DX[r] + dy * DY[r]
    if abs(axial) >= abs(lateral):
        return 0 if axial > 0 else 1
    return 2 if lateral > 0 else 3


def run_kernel(types, codes, targets, member_of_agent, cells, ident, agent_at,
               ax, ay, ah, tile_x, tile_y, hole_x, hole_y, hole_alive,
               initial_steps, idle_code, transit):
    """Run one episode in place; returns ``(dropped, steps_taken)``."""
    types_l = types.tolist()
    codes_l = codes.tolist()
    targets_l = targets.tolist()
    members = member_of_agent.tolist()
    cells_l = cells.tolist()
    ident_l = ident.tolist()
    occ = agent_at.tolist()
    axl, ayl, ahl = ax.tolist(), ay.tolist(), ah.tolist()
    txl, tyl = tile_x.tolist(), tile_y.tolist()
    hxl, hyl = hole_x.tolist(), hole_y.tolist()
    alive = hole_alive.tolist()
    height = len(cells_l)
    width = len(cells_l[0])
    n_nodes = len(types_l[0])
    n_agents = len(members)
    n_tiles = len(txl)
    transited = set()
    cursor = [0] * n_agents
    dropped = 0

    def sense(x, y):
        if x < 0 or y < 0 or x >= width or y >= height:
            return 3
        if occ[y][x] >= 0:
            return 0
        c = cells_l[y][x]
        if c == TILE:
            return 1
        if c == HOLE:
            return 2
        if c == OBSTACLE:
            return 3
        return 4

    def nearest(xs, ys, valid, x, y, second):
        best = second_best = None
        for i in range(len(xs)):
            if not valid(i):
                continue
            key = (abs(xs[i] - x) + abs(ys[i] - y), ys[i], xs[i])
            if best is None or key < best:
                second_best, best = best, key
            elif second_best is None or key < second_best:
                second_best = key
        if second and second_best is not None:
            return second_best
        return best

    def judge(a, code):
        x, y, h = axl[a], ayl[a], ahl[a]
        if code <= WEB:
            d = (h, (h + 1) & 3, (h + 3) & 3, (h + 2) & 3)[code]
            return sense(x + DX[d], y + DY[d])
        if code == NHD:
            key = nearest(hxl, hyl, lambda i: alive[i], x, y, False)
        else:
            key = nearest(txl, tyl, lambda i: txl[i] >= 0, x, y, code == SNTD)
        if key is None:
            return 0
        return _direction(h, key[2] - x, key[1] - y)

    def inside(x, y):
        return 0 <= x < width and 0 <= y < height

    for step in range(1, initial_steps + 1):
        for a in range(n_agents):
            m = members[a]
            mtypes, mcodes, mtargets = types_l[m], codes_l[m], targets_l[m]
            node = cursor[a]
            if mtypes[node] == START:
                transited.add((m, node, 0))
                node = mtargets[node][0]
            visits = 0
            action = -1
            while mtypes[node] == JUDGMENT:
                if visits == n_nodes:
                    action = idle_code
                    break
                b = judge(a, mcodes[node])
                transited.add((m, node, b))
                node = mtargets[node][b]
                visits += 1
            if action < 0:
                transited.add((m, node, 0))
                action = mcodes[node]
                cursor[a] = mtargets[node][0]
            else:
                cursor[a] = node

            if action == TR:
                ahl[a] = (ahl[a] + 1) & 3
            elif action == TL:
                ahl[a] = (ahl[a] + 3) & 3
            elif action == MF:
                x, y, h = axl[a], ayl[a], ahl[a]
                nx, ny = x + DX[h], y + DY[h]
                if not inside(nx, ny) or occ[ny][nx] >= 0:
                    continue
                c = cells_l[ny][nx]
                if c == TILE:
                    bx, by = nx + DX[h], ny + DY[h]
                    if not inside(bx, by) or occ[by][bx] >= 0:
                        continue
                    beyond = cells_l[by][bx]
                    t = ident_l[ny][nx]
                    if beyond == FLOOR:
                        cells_l[by][bx] = TILE
                        ident_l[by][bx] = t
                        txl[t], tyl[t] = bx, by
                    elif beyond == HOLE:
                        alive[ident_l[by][bx]] = 0
                        cells_l[by][bx] = FLOOR
                        ident_l[by][bx] = -1
                        txl[t] = tyl[t] = -1
                        dropped += 1
                    else:
                        continue
                    cells_l[ny][nx] = FLOOR
                    ident_l[ny][nx] = -1
                elif c != FLOOR:
                    continue
                occ[y][x] = -1
                occ[ny][nx] = a
                axl[a], ayl[a] = nx, ny
                if dropped == n_tiles:
                    break
        if dropped == n_tiles:
            break

    for m, node, b in transited:
        transit[m, node, b] = 1
    cells[:] = cells_l
    ident[:] = ident_l
    agent_at[:] = occ
    ax[:], ay[:], ah[:] = axl, ayl, ahl
    tile_x[:], tile_y[:] = txl, tyl
    hole_alive[:] = alive
    return dropped, step
