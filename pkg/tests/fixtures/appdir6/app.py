print('appliance entry point')
