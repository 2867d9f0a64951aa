"""Configure Django so pytest can collect the pcpd test suite."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'cpdlab.settings')
django.setup()
