import logging
import os

from django.core.management.base import BaseCommand, CommandError


class PcpdCommand(BaseCommand):
    """Shared plumbing of the synth, fit and bench commands"""

    def execute(self, *args, **options):
        if options.get('verbosity', 1) >= 2:
            logging.getLogger('pcpd').setLevel(logging.DEBUG)
        return super().execute(*args, **options)

    def validated(self, serializer):
        if not serializer.is_valid():
            raise CommandError(f'invalid arguments: {dict(serializer.errors)}')
        return serializer.save()

    def output_dir(self, path):
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as exc:
            raise CommandError(f'cannot create output directory {path}: {exc}')
        return path

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
