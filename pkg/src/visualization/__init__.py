"""
Visualization module initialization
"""

from .charts import (
    create_stage_psnr_chart,
    create_loss_chart,
    create_acceptance_chart,
    generate_report,
    write_report_html
)
from .masks import mask_overlay, mask_row_image, write_mask_rows

__all__ = [
    'create_stage_psnr_chart',
    'create_loss_chart',
    'create_acceptance_chart',
    'generate_report',
    'write_report_html',
    'mask_overlay',
    'mask_row_image',
    'write_mask_rows'
]
