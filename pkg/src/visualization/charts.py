"""
Visualization utilities for refinement runs.

This module builds the plotly charts of a progressive refinement report and
renders them into a standalone HTML page from the `templates/` directory.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from jinja2 import Environment, FileSystemLoader, select_autoescape
from plotly.subplots import make_subplots

LAYOUT = dict(
    height=300,
    margin=dict(l=10, r=10, t=50, b=10),
    paper_bgcolor='rgba(0,0,0,0)',
    plot_bgcolor='rgba(0,0,0,0)',
)
REPORT_CHARTS = ('psnr_chart', 'loss_chart', 'acceptance_chart')

_templates = Environment(loader=FileSystemLoader(Path(__file__).resolve().parent / 'templates'),
                         autoescape=select_autoescape(['html']))


def _stage_labels(stages: Sequence[int]) -> List[str]:
    return ['initial' if int(s) < 0 else f"stage {int(s)}" for s in stages]


def create_stage_psnr_chart(metrics: pd.DataFrame, baseline_psnr: Optional[float] = None) -> str:
    """
    Create a line chart of ground-view PSNR after the initial fit and every stage.

    Args:
        metrics: Stage metric table (columns 'stage', 'ground_psnr', 'altitude_factor')
        baseline_psnr: Optional aerial-only baseline drawn as a dashed line

    Returns:
        Plotly figure as JSON
    """
    labels = _stage_labels(metrics['stage'])
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=labels,
        y=metrics['ground_psnr'],
        mode='lines+markers',
        name='Ground PSNR',
        text=[f"altitude x{a:.2f}" if np.isfinite(a) else "" for a in metrics['altitude_factor']],
        line=dict(color='rgba(50, 168, 82, 0.9)', width=3),
        marker=dict(size=8, line=dict(width=2, color='DarkSlateGrey'))
    ))

    if baseline_psnr is not None and labels:
        fig.add_shape(
            type="line", xref="x", yref="y",
            x0=labels[0], y0=baseline_psnr, x1=labels[-1], y1=baseline_psnr,
            line=dict(color="Red", width=2, dash="dash"),
        )
        fig.add_annotation(
            x=labels[-1], y=baseline_psnr,
            text=f"Aerial-only: {baseline_psnr:.2f} dB",
            showarrow=False, yshift=10, font=dict(color="Red")
        )

    fig.update_layout(title="Ground-view PSNR per Stage", xaxis_title="Stage", yaxis_title="PSNR (dB)",
                      **LAYOUT)
    return fig.to_json()


def create_loss_chart(initial_losses: Sequence[float], stage_losses: Sequence[Sequence[float]]) -> str:
    """
    Create a loss curve over all optimizer steps, one trace per training phase.

    Returns:
        Plotly figure as JSON
    """
    fig = go.Figure()
    offset = 0
    phases = [('initial', list(initial_losses))] + \
        [(f"stage {k}", list(losses)) for k, losses in enumerate(stage_losses)]
    for name, losses in phases:
        if not losses:
            continue
        fig.add_trace(go.Scatter(
            x=list(range(offset, offset + len(losses))),
            y=losses,
            mode='lines',
            name=name,
        ))
        offset += len(losses)
    fig.update_layout(title="Training Loss", xaxis_title="Iteration", yaxis_title="Loss",
                      yaxis_type='log', **LAYOUT)
    return fig.to_json()


def create_acceptance_chart(metrics: pd.DataFrame) -> str:
    """
    Create a stacked bar chart of accepted and rejected fixed views per stage,
    with the mean DSSIM on a secondary axis.

    Returns:
        Plotly figure as JSON
    """
    stages = metrics[metrics['stage'] >= 0]
    labels = _stage_labels(stages['stage'])
    accepted = stages['views_accepted'].astype(int)
    rejected = stages['views_generated'].astype(int) - accepted

    fig = make_subplots(specs=[[{"secondary_y": True}]])
    fig.add_trace(go.Bar(name='Accepted', x=labels, y=accepted, marker_color='rgba(26, 118, 255, 0.8)'),
                  secondary_y=False)
    fig.add_trace(go.Bar(name='Rejected', x=labels, y=rejected, marker_color='rgba(211, 211, 211, 0.7)'),
                  secondary_y=False)
    fig.add_trace(go.Scatter(name='Mean DSSIM', x=labels, y=stages['mean_dssim'], mode='lines+markers',
                             line=dict(color='rgba(219, 68, 55, 0.9)', width=2, dash='dot')),
                  secondary_y=True)
    fig.update_layout(
        title="Fixed Views per Stage",
        barmode='stack',
        legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1),
        **LAYOUT
    )
    fig.update_yaxes(title_text="Views", secondary_y=False)
    fig.update_yaxes(title_text="DSSIM", secondary_y=True)
    return fig.to_json()


def generate_report(metrics: pd.DataFrame, initial_losses: Sequence[float] = (),
                    stage_losses: Sequence[Sequence[float]] = (),
                    baseline_psnr: Optional[float] = None) -> Dict[str, Any]:
    """
    Generate all charts for a refinement report.

    Args:
        metrics: Stage metric table from run_progressive
        initial_losses: Loss history of the initial fit
        stage_losses: Loss history of every stage's retraining
        baseline_psnr: Optional aerial-only ground PSNR

    Returns:
        Dictionary of Plotly figures as JSON plus the metric records
    """
    return {
        'psnr_chart': create_stage_psnr_chart(metrics, baseline_psnr),
        'loss_chart': create_loss_chart(initial_losses, stage_losses),
        'acceptance_chart': create_acceptance_chart(metrics),
        'metrics': metrics.to_dict(orient='records'),
    }


def write_report_html(path: Union[str, Path], report: Dict[str, Any], title: str = "Refinement report") -> Path:
    """
    Render the charts and the metric table into one HTML page.

    Args:
        path: Output file; parent directories are created
        report: Dictionary from generate_report
        title: Page title

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    charts = []
    for key in REPORT_CHARTS:
        if key in report:
            figure = json.loads(report[key])
            charts.append({'id': key, 'data': figure.get('data', []), 'layout': figure.get('layout', {})})
    table = pd.DataFrame(report.get('metrics', [])).to_html(index=False, float_format=lambda x: f"{x:.4f}")
    page = _templates.get_template('report.html').render(title=title, charts=charts, table=table)
    path.write_text(page, encoding='utf-8')
    return path
