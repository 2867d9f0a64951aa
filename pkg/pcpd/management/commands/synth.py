import os

from pcpd.management.base import PcpdCommand
from pcpd.serializers import SynthSpecSerializer
from pcpd.synth_bench import NOISE_STREAM, add_noise, derive_seed, gen_cpd
from pcpd.tensor_io import write_factors, write_tensor


def _dims(text):
    return [part.strip() for part in text.split(',') if part.strip()]


class Command(PcpdCommand):
    help = ('Generate a random CP tensor and write signal.tnsr, observed.tnsr '
            'and one factor_<n>.csv per mode into --out.')

    def add_arguments(self, parser):
        parser.add_argument('--dims', required=True, type=_dims, help='comma-separated sizes, e.g. 30,30,30')
        parser.add_argument('--rank', required=True, type=int)
        parser.add_argument('--snr', type=float, default=None, help='SNR in dB; omit for noise-free data')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--correlated', action='store_true', help='correlated factor rows')
        parser.add_argument('--out', required=True)

    def handle(self, *args, **options):
        spec = self.validated(SynthSpecSerializer(data={
            'dims': options['dims'],
            'true_rank': options['rank'],
            'snr_db': options['snr'],
            'factor_correlation': 'correlated' if options['correlated'] else 'iid',
            'seed': options['seed'],
        }))
        out = self.output_dir(options['out'])
        signal, model = gen_cpd(spec)
        observed = signal
        if spec.snr_db is not None:
            observed = add_noise(signal, spec.snr_db, derive_seed(spec.seed, 0, 0, NOISE_STREAM))
        write_tensor(os.path.join(out, 'signal.tnsr'), signal)
        write_tensor(os.path.join(out, 'observed.tnsr'), observed)
        write_factors(out, model.factors)
        self.success(f'Wrote rank-{spec.true_rank} tensor of shape {spec.dims} to {out}')
