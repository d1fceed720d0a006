version = '0.1.0.dev1'
short_version = '0.1.0'
