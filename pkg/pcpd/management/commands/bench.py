import os

from django.core.management.base import CommandError
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser

from pcpd.management.base import PcpdCommand
from pcpd.serializers import BenchConfigSerializer
from pcpd.synth_bench import run_bench, write_summary_csv, write_trials_csv


class Command(PcpdCommand):
    help = ('Run a rank-recovery benchmark described by a JSON config and write '
            'trials.csv (one row per trial) and summary.csv (one row per cell) into --out.')

    def add_arguments(self, parser):
        parser.add_argument('config', help='JSON file with the BenchConfig schema')
        parser.add_argument('--out', default='.')
        parser.add_argument('--parallelism', type=int, help='override the config worker count')

    def handle(self, *args, **options):
        try:
            with open(options['config'], 'rb') as handle:
                data = JSONParser().parse(handle)
        except FileNotFoundError:
            raise CommandError(f'no such config file: {options["config"]}')
        except ParseError as exc:
            raise CommandError(f'config is not valid JSON: {exc.detail}')
        if not isinstance(data, dict):
            raise CommandError('config must be a JSON object')
        if options['parallelism'] is not None:
            data['parallelism'] = options['parallelism']
        cfg = self.validated(BenchConfigSerializer(data=data))
        out = self.output_dir(options['out'])

        report = run_bench(cfg)
        with open(os.path.join(out, 'trials.csv'), 'w', newline='') as handle:
            write_trials_csv(report, handle)
        with open(os.path.join(out, 'summary.csv'), 'w', newline='') as handle:
            write_summary_csv(report, handle)
        failures = sum(cell.failures for cell in report.cells)
        self.success(f'{len(report.rows)} trials in {len(report.cells)} cells written to {out}'
                     + (f' ({failures} failed)' if failures else ''))
