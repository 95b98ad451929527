"""Contour figures (SVG via matplotlib) and the matching vertex tables."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure
from matplotlib.lines import Line2D
from matplotlib.patches import Polygon as PolygonPatch

from .engine import ContourSet

PLAYER_COLORS = {"Djokovic": "#1b7837", "Federer": "#b2182b", "Nadal": "#2166ac"}
FALLBACK_COLORS = ("#1b7837", "#b2182b", "#2166ac", "#e08214", "#762a83", "#4d4d4d")
AXIS_LABELS = ("relative points won", "minutes")

STYLE = {
    "svg.hashsalt": "tennis-dqr",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _panel_key(entry) -> tuple:
    p = entry.profile
    return (p.win, p.surface, p.tournament, p.top20)


def _panel_title(entry, family: str) -> str:
    p = entry.profile
    return {
        "win": "wins" if p.win else "losses",
        "top20": "against top 20" if p.top20 else "against others",
        "surface": p.surface,
        "tournament": p.tournament,
    }.get(family, entry.name)


def _panels(cs: ContourSet):
    panels: dict[tuple, list] = {}
    for e in cs.profiles:
        panels.setdefault(_panel_key(e), []).append(e)
    return list(panels.values())


def render_contours(cs: ContourSet, out_path, standardized: bool = False,
                    panel_size: tuple[float, float] = (3.2, 3.0)) -> Path:
    """One panel per covariate setting, one outline per player.

    Output bytes depend only on the inputs and arguments.
    """
    out_path = Path(out_path)
    panels = _panels(cs)
    with matplotlib.rc_context(STYLE):
        fig = Figure(figsize=(panel_size[0] * len(panels), panel_size[1]))
        axes = fig.subplots(1, len(panels), squeeze=False)[0]
        gid = 0
        for ax, entries in zip(axes, panels):
            players = [e.profile.player for e in entries]
            by_player = len(set(players)) == len(players)
            handles = []
            for k, e in enumerate(entries):
                color = PLAYER_COLORS[e.profile.player] if by_player else FALLBACK_COLORS[k % len(FALLBACK_COLORS)]
                label = e.profile.player if by_player else e.name
                poly = e.standardized if standardized else e.original
                if poly.is_empty:
                    handles.append(Line2D([], [], color=color, linestyle=":", label=f"{label} (empty region)"))
                else:
                    patch = PolygonPatch(poly.vertices, closed=True, fill=False, edgecolor=color,
                                         linewidth=1.4, label=label, gid=f"contour-{gid}")
                    ax.add_patch(patch)
                    handles.append(Line2D([], [], color=color, label=label))
                gid += 1
            ax.autoscale_view()
            ax.margins(0.08)
            suffix = " (standardized)" if standardized else ""
            ax.set_xlabel(AXIS_LABELS[0] + suffix)
            ax.set_ylabel(AXIS_LABELS[1] + suffix)
            if len(panels) > 1 or cs.family != "custom":
                ax.set_title(_panel_title(entries[0], cs.family))
            ax.legend(handles=handles, loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None, "Creator": None})
    return out_path


def write_vertex_table(cs: ContourSet, path) -> Path:
    """Long-format CSV: one row per polygon vertex, both unit systems."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["profile", "player", "win", "surface", "tournament", "top20",
                    "vertex", "rel_points", "minutes", "z_rel_points", "z_minutes"])
        for e in cs.profiles:
            p = e.profile
            head = [e.name, p.player, int(p.win), p.surface, p.tournament, int(p.top20)]
            if e.standardized.is_empty:
                w.writerow(head + ["", "", "", "", ""])
                continue
            for k, (orig, std) in enumerate(zip(e.original.vertices, e.standardized.vertices)):
                w.writerow(head + [k, repr(float(orig[0])), repr(float(orig[1])),
                                   repr(float(std[0])), repr(float(std[1]))])
    return path
