import csv
import os

import numpy as np
from django.core.management.base import CommandError
from rest_framework.renderers import JSONRenderer

from pcpd.exceptions import PcpdError
from pcpd.management.base import PcpdCommand
from pcpd.serializers import FitOptionsSerializer, FitReportSerializer
from pcpd.synth_bench import ALGORITHMS, fit_value, rmse, snr_output
from pcpd.tensor_io import read_tensor, write_factors

# command-line flag -> FitOptions field
OPTION_FLAGS = {
    'rank_bound': 'rank_bound',
    'rank_bound_factor': 'rank_bound_factor',
    'max_iters': 'max_iters',
    'tol': 'tol',
    'prune_threshold': 'prune_rel_threshold',
    'noise_period': 'noise_update_period',
    'fixed_beta': 'fixed_beta',
    'seed': 'seed',
}


class Command(PcpdCommand):
    help = 'Fit a probabilistic CPD to a TNSR tensor file and write report.json into --out.'

    def add_arguments(self, parser):
        parser.add_argument('tensor', help='path of the observed tensor (.tnsr)')
        parser.add_argument('--algo', choices=['gh', 'gg', 'gg-ho'], default='gh')
        bound = parser.add_mutually_exclusive_group()
        bound.add_argument('--rank-bound', type=int)
        bound.add_argument('--rank-bound-factor', type=float)
        parser.add_argument('--max-iters', type=int)
        parser.add_argument('--tol', type=float)
        parser.add_argument('--prune-threshold', type=float)
        parser.add_argument('--no-prune', action='store_true', help='keep every column')
        parser.add_argument('--noise-period', type=int, help='update the noise precision every N sweeps')
        parser.add_argument('--fixed-beta', type=float, help='freeze the noise precision at this value')
        parser.add_argument('--elbo', action='store_true', help='track the ELBO every sweep')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--out', default='.')
        parser.add_argument('--csv', action='store_true', help='also write z_powers.csv and elbo_trace.csv')
        parser.add_argument('--reference', help='clean tensor (.tnsr) for RMSE and Fit')
        parser.add_argument('--save-factors', action='store_true', help='write the pruned factor means')
        parser.add_argument('--record-timings', action='store_true',
                            help='include wall_time_seconds in report.json')

    def handle(self, *args, **options):
        data = {field: options[flag] for flag, field in OPTION_FLAGS.items() if options[flag] is not None}
        if options['no_prune']:
            data['prune'] = False
        if options['elbo']:
            data['compute_elbo'] = True
        opts = self.validated(FitOptionsSerializer(data=data))

        y = self._load(options['tensor'])
        reference = self._load(options['reference']) if options['reference'] else None
        if reference is not None and reference.shape != y.shape:
            raise CommandError(f'reference shape {reference.shape} differs from tensor shape {y.shape}')
        out = self.output_dir(options['out'])

        try:
            report = ALGORITHMS[options['algo'].replace('-', '_')](y, opts)
        except PcpdError as exc:
            raise CommandError(f'fit failed: {exc}')

        recon = report.reconstruction
        try:
            metrics = {'snr_output': snr_output(y, recon)}
            if reference is not None:
                metrics['rmse'] = rmse(reference, recon)
                metrics['fit'] = fit_value(reference, recon)
        except PcpdError as exc:
            raise CommandError(f'metrics failed: {exc}')
        context = {'metrics': metrics, 'options': opts, 'record_timings': options['record_timings']}
        payload = FitReportSerializer(report, context=context).data
        with open(os.path.join(out, 'report.json'), 'wb') as handle:
            handle.write(JSONRenderer().render(payload, renderer_context={'indent': 2}))
        if options['csv']:
            self._write_column(os.path.join(out, 'z_powers.csv'), 'z_power', report.z_powers)
            if report.elbo_trace:
                self._write_column(os.path.join(out, 'elbo_trace.csv'), 'elbo', report.elbo_trace)
        if options['save_factors']:
            write_factors(out, report.model.factors)
        self.success(f'Estimated rank {report.estimated_rank} after {report.iterations_run} sweeps '
                     f'({"converged" if report.converged else "not converged"}); report in {out}')

    def _load(self, path):
        try:
            return read_tensor(path)
        except FileNotFoundError:
            raise CommandError(f'no such tensor file: {path}')
        except PcpdError as exc:
            raise CommandError(str(exc))

    def _write_column(self, path, name, values):
        with open(path, 'w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(['index', name])
            for index, value in enumerate(np.asarray(values, dtype=np.float64)):
                writer.writerow([index, repr(float(value))])
