"""
Exportação de relatórios de benchmark em CSV e Excel.
"""

import os
from datetime import datetime

import pandas as pd
import xlsxwriter


def reports_frame(reports):
    """DataFrame com uma linha por BenchReport, colunas na ordem estável dos registros."""
    return pd.DataFrame([r.to_record() for r in reports])


def write_csv(reports, output_path):
    """
    Grava os relatórios em CSV (pronto para gráficos externos).

    Args:
        reports (list): Lista de BenchReport.
        output_path (str): Caminho do arquivo.

    Returns:
        str: Caminho gravado.
    """
    os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
    frame = reports_frame(reports)
    frame.to_csv(output_path, index=False)
    return output_path


def write_excel(reports, output_path):
    """
    Gera um workbook com a aba de resultados e uma aba de amostras brutas.

    Args:
        reports (list): Lista de BenchReport.
        output_path (str): Caminho para salvar o Excel.
    """
    os.makedirs(os.path.dirname(os.path.abspath(output_path)), exist_ok=True)
    workbook = xlsxwriter.Workbook(output_path)

    # Definir formatos
    header_format = workbook.add_format({
        'bold': True,
        'bg_color': '#4285F4',
        'font_color': 'white',
        'border': 1,
        'align': 'center',
        'valign': 'vcenter'
    })
    cell_format = workbook.add_format({'border': 1})
    number_format = workbook.add_format({'border': 1, 'num_format': '#,##0.000'})
    title_format = workbook.add_format({'bold': True, 'font_size': 14, 'font_color': '#4285F4'})

    _write_results(workbook, reports, header_format, cell_format, number_format, title_format)
    _write_samples(workbook, reports, header_format, number_format, title_format)

    workbook.close()
    return output_path


def _write_results(workbook, reports, header_format, cell_format, number_format, title_format):
    worksheet = workbook.add_worksheet('Resultados')
    if not reports:
        worksheet.write(0, 0, 'Não há resultados para este relatório.', title_format)
        return

    records = [r.to_record() for r in reports]
    columns = list(records[0])

    worksheet.write(0, 0, 'Benchmark Hermes', title_format)
    worksheet.write(1, 0, f'Gerado em: {datetime.now().strftime("%d/%m/%Y %H:%M:%S")}')

    for col_idx, column in enumerate(columns):
        worksheet.write(3, col_idx, column, header_format)

    for row_idx, record in enumerate(records):
        for col_idx, column in enumerate(columns):
            value = record[column]
            if isinstance(value, bool) or value is None:
                worksheet.write(row_idx + 4, col_idx, '' if value is None else str(value), cell_format)
            elif isinstance(value, (int, float)):
                worksheet.write(row_idx + 4, col_idx, value, number_format)
            else:
                worksheet.write(row_idx + 4, col_idx, value, cell_format)

    for col_idx, column in enumerate(columns):
        worksheet.set_column(col_idx, col_idx, max(len(column) + 2, 12))

    worksheet.autofilter(3, 0, 3 + len(records), len(columns) - 1)
    worksheet.freeze_panes(4, 0)


def _write_samples(workbook, reports, header_format, number_format, title_format):
    sheet = workbook.add_worksheet('Amostras')
    sampled = [r for r in reports if r.samples_ms]
    if not sampled:
        sheet.write(0, 0, 'Nenhuma amostra bruta registrada.', title_format)
        return

    headers = ['suite', 'group_size', 'amostra', 'ms']
    for col_idx, header in enumerate(headers):
        sheet.write(0, col_idx, header, header_format)
    row = 1
    for report in sampled:
        for idx, sample in enumerate(report.samples_ms):
            sheet.write(row, 0, report.suite)
            sheet.write(row, 1, report.group_size)
            sheet.write(row, 2, idx + 1)
            sheet.write(row, 3, sample, number_format)
            row += 1
    sheet.set_column(0, 3, 14)
