"""
Tables aggregating the metrics of many runs.

A :py:class:`MetricsTable` has one row per run. Its main columns describe the run, and every metric
group (walks, TLBs, PWCs, caches, energy, node census) is stored in a separate category table aligned
with the main table by row.
"""
import logging
import math
from collections import OrderedDict

import pandas as pd
from hdmf.common import AlignedDynamicTable, DynamicTable, VectorData
from hdmf.utils import docval, getargs, popargs, get_docval

logger = logging.getLogger(__name__)

#: Metric groups of a report, in table order
METRIC_CATEGORIES = ('walks', 'tlb', 'pwc', 'caches', 'energy', 'census')

_MISSING = float('nan')


class MetricsTable(AlignedDynamicTable):
    """
    Runs (rows) with their configuration in the main table and one category table per metric group
    """

    __columns__ = (
        {'name': 'label', 'description': 'label of the run', 'required': True},
        {'name': 'scheme', 'description': 'level scheme of the (guest) table', 'required': True},
        {'name': 'host_scheme', 'description': 'level scheme of the host table, empty for native runs',
         'required': True},
        {'name': 'virtualized', 'description': 'True for nested translation', 'required': True},
        {'name': 'fragmentation', 'description': 'fraction of the footprint backed by 2 MB pages', 'required': True},
        {'name': 'prioritization', 'description': 'True if page-table prioritization was enabled',
         'required': True},
        {'name': 'generator', 'description': 'trace generator', 'required': True},
        {'name': 'seed', 'description': 'seed of the run', 'required': True},
    )

    @docval({'name': 'name', 'type': str, 'doc': 'name of the table', 'default': 'runs'},
            *get_docval(AlignedDynamicTable.__init__, 'id', 'columns', 'colnames', 'category_tables', 'categories'))
    def __init__(self, **kwargs):
        kwargs['description'] = 'Address translation metrics, one row per simulated run'
        super().__init__(**kwargs)

    @classmethod
    def from_reports(cls, reports, name='runs'):
        """
        Build the table from MetricsReport objects. Metrics missing from a report are NaN.

        :raises: ValueError if no report is given
        """
        reports = list(reports)
        if not reports:
            raise ValueError("Cannot build a metrics table without reports")
        columns = [VectorData(name=spec['name'], description=spec['description'],
                              data=[r.run[spec['name']] for r in reports])
                   for spec in cls.__columns__]
        category_tables = []
        for category in METRIC_CATEGORIES:
            names = OrderedDict()
            for r in reports:
                names.update((k, None) for k in r.metrics.get(category, {}))
            if not names:
                continue
            metric_columns = [VectorData(name=metric, description='%s metric %s' % (category, metric),
                                         data=[r.metrics.get(category, {}).get(metric, _MISSING) for r in reports])
                              for metric in names]
            category_tables.append(DynamicTable(name=category, description='%s metrics' % category,
                                                columns=metric_columns, id=list(range(len(reports)))))
        return cls(name=name, columns=columns, id=list(range(len(reports))), category_tables=category_tables)

    @docval({'name': 'category', 'type': str, 'doc': 'the metric group'},
            {'name': 'metric', 'type': str, 'doc': 'the metric'},
            returns='list of the metric over all runs', rtype=list)
    def metric(self, **kwargs):
        category, metric = getargs('category', 'metric', kwargs)
        if category not in self.category_tables:
            raise KeyError("No metric group %s, expected one of %s" % (category, self.categories))
        table = self.category_tables[category]
        if metric not in table.colnames:
            raise KeyError("No metric %s in group %s" % (metric, category))
        return list(table[metric].data)

    def to_flat_dataframe(self):
        """DataFrame with the (category, metric) column index flattened to ``category.metric``"""
        df = self.to_dataframe(ignore_category_ids=True)
        df.columns = ['%s.%s' % (c, m) if c != self.name else m for c, m in df.columns]
        df.index.name = 'id'
        return df

    def to_csv(self, path):
        self.to_flat_dataframe().to_csv(path)


class ComparisonReport(DynamicTable):
    """Relative deltas of every metric of a set of variant runs against a baseline run"""

    __columns__ = (
        {'name': 'variant', 'description': 'label of the variant run', 'required': True},
        {'name': 'category', 'description': 'metric group', 'required': True},
        {'name': 'metric', 'description': 'metric name', 'required': True},
        {'name': 'baseline', 'description': 'value of the baseline run', 'required': True},
        {'name': 'value', 'description': 'value of the variant run', 'required': True},
        {'name': 'delta', 'description': '(value - baseline) / baseline', 'required': True},
    )

    @docval({'name': 'baseline_label', 'type': str, 'doc': 'label of the baseline run'},
            *get_docval(DynamicTable.__init__, 'id', 'columns', 'colnames'))
    def __init__(self, **kwargs):
        baseline_label = popargs('baseline_label', kwargs)
        kwargs['name'] = 'comparison'
        kwargs['description'] = 'Metric deltas relative to run %s' % baseline_label
        super().__init__(**kwargs)
        self.baseline_label = baseline_label

    @docval({'name': 'variant', 'type': str, 'doc': 'label of the variant run'},
            {'name': 'category', 'type': str, 'doc': 'metric group'},
            {'name': 'metric', 'type': str, 'doc': 'metric name'},
            {'name': 'baseline', 'type': (int, float), 'doc': 'value of the baseline run'},
            {'name': 'value', 'type': (int, float), 'doc': 'value of the variant run'},
            {'name': 'delta', 'type': (int, float), 'doc': 'relative delta'},
            returns='index of the added row', rtype=int)
    def add_delta(self, **kwargs):
        super().add_row(**kwargs)
        return len(self.id) - 1

    def get_delta(self, variant, category, metric):
        """
        Get one delta

        :raises: KeyError if the table holds no such delta
        """
        df = self.to_dataframe()
        rows = df[(df['variant'] == variant) & (df['category'] == category) & (df['metric'] == metric)]
        if len(rows) == 0:
            raise KeyError("No delta of %s.%s for variant %s" % (category, metric, variant))
        return float(rows['delta'].iloc[0])

    def to_records(self):
        """List of one dict per delta, with infinite deltas as strings so that they are valid JSON"""
        res = []
        for row in self.to_dataframe().itertuples(index=False):
            rec = row._asdict()
            for key in ('baseline', 'value', 'delta'):
                value = float(rec[key])
                rec[key] = value if math.isfinite(value) else str(value)
            res.append(rec)
        return res

    def to_csv(self, path):
        self.to_dataframe().to_csv(path)

    def pivot(self):
        """Deltas as a DataFrame with one row per (category, metric) and one column per variant"""
        return pd.pivot_table(self.to_dataframe(), index=['category', 'metric'], columns='variant', values='delta',
                              sort=False)
